"""Key derivation, key rings, rotation and parse fallback.

File format (JSON, version 1)::

    {"version": 1, "default": "<id>",
     "keys": [{"id": "<id>", "secret": "<64 hex>",
               "createdAt": "<RFC 3339>", "compromised": false}]}
"""
from __future__ import annotations

import json
import os
import secrets
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator, Optional, Tuple, Union

from blake3 import blake3

from .errors import BadSecretLength, CompromisedKey, DuplicateKeyId, EmptyRing
from .secure import (
    CollisionPredicate,
    InvalidReason,
    ParseOutcome,
    collision_predicate,
    parse_auto,
)
from .skeid import UuidLike, to_bytes

# Part of the external interface; changing either breaks every issued id.
MAC_CONTEXT = "skid-kit 2025 mac v1"
AES_CONTEXT = "skid-kit 2025 aes v1"
SECRET_LEN = 32
FILE_VERSION = 1
KEYRING_ENV = "SKID_KEYRING"


def derive_keys(master_secret: bytes) -> Tuple[bytes, bytes]:
    """``(mac_key, aes_key)`` from a 32-byte master secret via BLAKE3 derive-key mode."""
    if len(master_secret) != SECRET_LEN:
        raise BadSecretLength(f"master secret must be {SECRET_LEN} bytes, got {len(master_secret)}")
    material = bytes(master_secret)
    mac_key = blake3(material, derive_key_context=MAC_CONTEXT).digest()
    aes_key = blake3(material, derive_key_context=AES_CONTEXT).digest()
    return mac_key, aes_key


def default_key_id(master_secret: bytes) -> str:
    return blake3(bytes(master_secret)).hexdigest()[:12]


def _utcnow() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)


def _format_time(value: datetime) -> str:
    return value.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def _parse_time(text: str) -> datetime:
    value = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if value.tzinfo is None:
        value = value.replace(tzinfo=timezone.utc)
    return value


@dataclass(frozen=True)
class KeyEntry:
    key_id: str
    master_secret: bytes = field(repr=False)
    created_at: datetime
    compromised: bool = False
    mac_key: bytes = field(init=False, repr=False, compare=False)
    aes_key: bytes = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        mac_key, aes_key = derive_keys(self.master_secret)
        if mac_key == aes_key:  # pragma: no cover - distinct contexts
            raise ValueError("derived MAC and AES keys collide")
        object.__setattr__(self, "mac_key", mac_key)
        object.__setattr__(self, "aes_key", aes_key)

    @classmethod
    def create(cls, master_secret: Optional[bytes] = None, key_id: Optional[str] = None,
               created_at: Optional[datetime] = None) -> "KeyEntry":
        if master_secret is None:
            master_secret = secrets.token_bytes(SECRET_LEN)
        return cls(key_id or default_key_id(master_secret), bytes(master_secret),
                   created_at or _utcnow())


@dataclass(frozen=True)
class KeyRing:
    """Immutable ordered key set, newest first, with exactly one default."""

    entries: Tuple[KeyEntry, ...]
    default_key_id: str

    def __post_init__(self) -> None:
        if not self.entries:
            raise EmptyRing("a key ring needs at least one entry")
        ids = [e.key_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise DuplicateKeyId(f"duplicate key ids in {ids}")
        if self.default_key_id not in ids:
            raise KeyError(f"default key {self.default_key_id!r} not in ring")
        ordered = sorted(self.entries, key=lambda e: e.created_at, reverse=True)
        object.__setattr__(self, "entries", tuple(ordered))

    @classmethod
    def single(cls, master_secret: Optional[bytes] = None, key_id: Optional[str] = None,
               created_at: Optional[datetime] = None) -> "KeyRing":
        entry = KeyEntry.create(master_secret, key_id, created_at)
        return cls((entry,), entry.key_id)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, key_id: str) -> KeyEntry:
        for entry in self.entries:
            if entry.key_id == key_id:
                return entry
        raise KeyError(key_id)

    @property
    def default(self) -> KeyEntry:
        return self[self.default_key_id]

    def generation_entry(self) -> KeyEntry:
        """Default entry for issuing new identifiers; refuses compromised keys."""
        entry = self.default
        if entry.compromised:
            raise CompromisedKey(f"default key {entry.key_id!r} is marked compromised")
        return entry

    def parse_order(self) -> Iterator[KeyEntry]:
        yield self.default
        for entry in self.entries:
            if entry.key_id != self.default_key_id:
                yield entry

    def mark_compromised(self, key_id: str, compromised: bool = True) -> "KeyRing":
        self[key_id]  # raises KeyError for unknown ids
        entries = tuple(replace(e, compromised=compromised) if e.key_id == key_id else e
                        for e in self.entries)
        return KeyRing(entries, self.default_key_id)

    def to_json(self) -> dict:
        return {
            "version": FILE_VERSION,
            "default": self.default_key_id,
            "keys": [
                {
                    "id": e.key_id,
                    "secret": e.master_secret.hex(),
                    "createdAt": _format_time(e.created_at),
                    "compromised": e.compromised,
                }
                for e in self.entries
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "KeyRing":
        if doc.get("version") != FILE_VERSION:
            raise ValueError(f"unsupported keyring version {doc.get('version')!r}")
        entries = []
        for item in doc["keys"]:
            secret = bytes.fromhex(item["secret"])
            entries.append(KeyEntry(item["id"], secret, _parse_time(item["createdAt"]),
                                    bool(item.get("compromised", False))))
        return cls(tuple(entries), doc["default"])

    def save(self, path: Union[str, Path]) -> None:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        fd = os.open(tmp, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
        with os.fdopen(fd, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "KeyRing":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def rotate(ring: KeyRing, new_secret: Optional[bytes] = None, key_id: Optional[str] = None,
           created_at: Optional[datetime] = None) -> KeyRing:
    """New ring whose default is a fresh entry; old entries stay for fallback."""
    entry = KeyEntry.create(new_secret, key_id, created_at)
    if any(e.key_id == entry.key_id for e in ring.entries):
        raise DuplicateKeyId(f"key id {entry.key_id!r} already in ring")
    newest = max(e.created_at for e in ring.entries)
    if entry.created_at < newest:
        raise ValueError("rotated key cannot predate existing entries")
    return KeyRing((entry,) + ring.entries, entry.key_id)


def parse_with_fallback(
    candidate: UuidLike,
    ring: KeyRing,
    collides: CollisionPredicate = collision_predicate,
) -> ParseOutcome:
    """Parse with the default key, then older keys newest first."""
    if not ring.entries:  # pragma: no cover - KeyRing forbids it
        raise EmptyRing("cannot parse with an empty key ring")
    data = to_bytes(candidate)
    reasons = []
    for entry in ring.parse_order():
        outcome = parse_auto(data, entry.mac_key, entry.aes_key, collides)
        if outcome.valid:
            return replace(outcome, key_id=entry.key_id)
        reasons.append(outcome.reason)
    return ParseOutcome.invalid(InvalidReason.NO_KEY_MATCHED, tuple(reasons))


def resolve_keyring_path(path: Optional[str]) -> Optional[str]:
    return path or os.environ.get(KEYRING_ENV) or None
