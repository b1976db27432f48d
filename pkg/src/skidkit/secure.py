"""Secure SKEIDs: one AES-256 block per identifier, plus auto-detecting parse."""
from __future__ import annotations

import enum
import threading
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Tuple

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .errors import JackpotError
from .skeid import (
    DEFAULT_VARIANT,
    MAX_VARIANT,
    SKEID_LEN,
    VERSION_MARKER,
    ParsedSkeid,
    UuidLike,
    build_skeid,
    extract_skid,
    rebuild_with_variant,
    to_bytes,
    verify_mac,
)

AES_KEY_LEN = 32
MAX_ATTEMPTS = MAX_VARIANT - DEFAULT_VARIANT + 1  # 51

CollisionPredicate = Callable[[bytes, bytes], bool]


class _BlockCipher:
    """AES-256 on exactly one 16-byte block, no padding, no IV.

    Contexts are per thread; an ECB context carries no state between blocks.
    """

    def __init__(self, key: bytes) -> None:
        if len(key) != AES_KEY_LEN:
            raise ValueError(f"AES key must be {AES_KEY_LEN} bytes, got {len(key)}")
        self._cipher = Cipher(algorithms.AES(key), modes.ECB())
        self._local = threading.local()

    def encrypt(self, block: bytes) -> bytes:
        if len(block) != SKEID_LEN:
            raise ValueError("single-block cipher takes exactly 16 bytes")
        ctx = getattr(self._local, "enc", None)
        if ctx is None:
            ctx = self._local.enc = self._cipher.encryptor()
        return ctx.update(block)

    def decrypt(self, block: bytes) -> bytes:
        if len(block) != SKEID_LEN:
            raise ValueError("single-block cipher takes exactly 16 bytes")
        ctx = getattr(self._local, "dec", None)
        if ctx is None:
            ctx = self._local.dec = self._cipher.decryptor()
        return ctx.update(block)


@lru_cache(maxsize=64)
def block_cipher(aes_key: bytes) -> _BlockCipher:
    return _BlockCipher(bytes(aes_key))


def encrypt_block(block: bytes, aes_key: bytes) -> bytes:
    return block_cipher(bytes(aes_key)).encrypt(bytes(block))


def decrypt_block(block: bytes, aes_key: bytes) -> bytes:
    return block_cipher(bytes(aes_key)).decrypt(bytes(block))


class InvalidReason(enum.Enum):
    NO_MARKERS = "NoMarkers"
    MAC_FAILURE = "MacFailure"
    VARIANT_BELOW_DEFAULT = "VariantBelowDefault"
    BACKWARD_VERIFICATION_FAILED = "BackwardVerificationFailed"
    NO_KEY_MATCHED = "NoKeyMatched"


class Tier(enum.Enum):
    PLAIN = "skeid"
    SECURE = "secure"
    INVALID = "invalid"


@dataclass(frozen=True)
class ParseOutcome:
    tier: Tier
    parsed: Optional[ParsedSkeid] = None
    reason: Optional[InvalidReason] = None
    # secondary reasons when several paths failed
    details: Tuple[InvalidReason, ...] = ()
    key_id: Optional[str] = None

    @property
    def valid(self) -> bool:
        return self.tier is not Tier.INVALID

    @classmethod
    def invalid(cls, reason: InvalidReason, details: Tuple[InvalidReason, ...] = ()) -> "ParseOutcome":
        return cls(Tier.INVALID, reason=reason, details=details)


def collision_predicate(ciphertext: bytes, mac_key: bytes) -> bool:
    """True when the ciphertext would pass as a valid plaintext SKEID."""
    return (
        ciphertext[6] == VERSION_MARKER
        and ciphertext[8] == DEFAULT_VARIANT
        and verify_mac(ciphertext, mac_key)
    )


def to_secure(
    skid: int,
    epoch_index: int,
    entity_type: int,
    mac_key: bytes,
    aes_key: bytes,
    collides: CollisionPredicate = collision_predicate,
) -> bytes:
    """Encrypt the SKEID for ``skid``, escalating the variant byte on collision."""
    cipher = block_cipher(bytes(aes_key))
    for variant in range(DEFAULT_VARIANT, MAX_VARIANT + 1):
        plaintext = build_skeid(skid, epoch_index, entity_type, mac_key, variant)
        ciphertext = cipher.encrypt(plaintext)
        if not collides(ciphertext, mac_key):
            return ciphertext
    raise JackpotError(f"all {MAX_ATTEMPTS} variants collided for skid {skid:#x}")


def skeid_to_secure(
    skeid: bytes,
    mac_key: bytes,
    aes_key: bytes,
    collides: CollisionPredicate = collision_predicate,
) -> bytes:
    """Convert an existing plaintext SKEID (variant ignored) to its secure form."""
    skeid = to_bytes(skeid)
    return to_secure(extract_skid(skeid), skeid[0], skeid[7], mac_key, aes_key, collides)


def backward_verify(
    decrypted: bytes,
    mac_key: bytes,
    aes_key: bytes,
    collides: CollisionPredicate = collision_predicate,
) -> bool:
    """Check that variant V-1 of this identifier really collided."""
    variant = decrypted[8]
    if not DEFAULT_VARIANT < variant <= MAX_VARIANT:
        return False
    previous = rebuild_with_variant(decrypted, variant - 1, mac_key)
    return collides(encrypt_block(previous, aes_key), mac_key)


def _secure_path(
    data: bytes, mac_key: bytes, aes_key: bytes, collides: CollisionPredicate
) -> ParseOutcome:
    plaintext = decrypt_block(data, aes_key)
    variant = plaintext[8]
    if plaintext[6] != VERSION_MARKER or (variant & 0xC0) != 0x80:
        return ParseOutcome.invalid(InvalidReason.NO_MARKERS)
    if variant < DEFAULT_VARIANT:
        return ParseOutcome.invalid(InvalidReason.VARIANT_BELOW_DEFAULT)
    mac_ok = verify_mac(plaintext, mac_key)
    if variant > DEFAULT_VARIANT and not backward_verify(plaintext, mac_key, aes_key, collides):
        return ParseOutcome.invalid(InvalidReason.BACKWARD_VERIFICATION_FAILED)
    if not mac_ok:
        return ParseOutcome.invalid(InvalidReason.MAC_FAILURE)
    parsed = ParsedSkeid(extract_skid(plaintext), plaintext[0], plaintext[7], variant, True)
    return ParseOutcome(Tier.SECURE, parsed)


def to_plain(
    secure: UuidLike,
    mac_key: bytes,
    aes_key: bytes,
    collides: CollisionPredicate = collision_predicate,
) -> ParseOutcome:
    """Decrypt and validate a Secure SKEID; never tries the plaintext path."""
    return _secure_path(to_bytes(secure), mac_key, aes_key, collides)


def parse_auto(
    candidate: UuidLike,
    mac_key: bytes,
    aes_key: bytes,
    collides: CollisionPredicate = collision_predicate,
) -> ParseOutcome:
    """Classify ``candidate`` as plaintext SKEID, Secure SKEID or invalid.

    Exact 0x8D markers at bytes 6 and 8 try the plaintext MAC first; on any
    miss the block is decrypted and checked as a Secure SKEID.
    """
    data = to_bytes(candidate)
    plain_failed = False
    if data[6] == VERSION_MARKER and data[8] == DEFAULT_VARIANT:
        if verify_mac(data, mac_key):
            return ParseOutcome(
                Tier.PLAIN,
                ParsedSkeid(extract_skid(data), data[0], data[7], data[8], False))
        plain_failed = True
    outcome = _secure_path(data, mac_key, aes_key, collides)
    if plain_failed and not outcome.valid:
        return ParseOutcome.invalid(
            InvalidReason.NO_KEY_MATCHED, (InvalidReason.MAC_FAILURE, outcome.reason))
    return outcome
