"""Generator plus key ring: issue identifiers at any tier."""
from __future__ import annotations

from typing import Optional

from .keyring import KeyRing, parse_with_fallback
from .secure import CollisionPredicate, ParseOutcome, collision_predicate, to_secure
from .skeid import UuidLike, build_skeid, to_uuid_string
from .skid import SkidGenerator


class IdIssuer:
    def __init__(self, generator: SkidGenerator, ring: Optional[KeyRing] = None,
                 collides: CollisionPredicate = collision_predicate) -> None:
        self.generator = generator
        self.ring = ring
        self.collides = collides

    @property
    def epoch_index(self) -> int:
        return self.generator.identity.epoch_index

    def _keys(self):
        if self.ring is None:
            raise ValueError("a key ring is required for SKEID and Secure SKEID tiers")
        return self.ring.generation_entry()

    def skid(self, entity_type: int | str = 0, block: bool = True) -> int:
        return self.generator.generate(entity_type, block=block)

    def skeid_for(self, skid: int, entity_type: int) -> bytes:
        return build_skeid(skid, self.epoch_index, entity_type, self._keys().mac_key)

    def secure_for(self, skid: int, entity_type: int) -> bytes:
        entry = self._keys()
        return to_secure(skid, self.epoch_index, entity_type, entry.mac_key, entry.aes_key,
                         self.collides)

    def skeid(self, entity_type: int | str = 0, block: bool = True) -> bytes:
        et = self.generator.identity.entity_type(entity_type)
        return self.skeid_for(self.skid(et, block), et)

    def secure(self, entity_type: int | str = 0, block: bool = True) -> bytes:
        et = self.generator.identity.entity_type(entity_type)
        return self.secure_for(self.skid(et, block), et)

    def skeid_str(self, entity_type: int | str = 0) -> str:
        return to_uuid_string(self.skeid(entity_type))

    def secure_str(self, entity_type: int | str = 0) -> str:
        return to_uuid_string(self.secure(entity_type))

    def parse(self, candidate: UuidLike) -> ParseOutcome:
        if self.ring is None:
            raise ValueError("a key ring is required to parse")
        return parse_with_fallback(candidate, self.ring, self.collides)
