"""128-bit plaintext SKEIDs.

Byte layout (big-endian)::

    0     epoch index
    1-4   SKID bits 63..32, XOR 0x80000000
    5     SKID bits 31..24
    6     version marker 0x8D
    7     entity type
    8     variant marker (0x8D, escalated up to 0xBF by the collision guard)
    9-11  SKID bits 23..0
    12-15 BLAKE3 keyed MAC, truncated to 4 bytes
"""
from __future__ import annotations

import hmac
import uuid
from dataclasses import dataclass
from typing import Union

from blake3 import blake3

from .errors import FieldOutOfRange, InvalidVariant, MalformedLayout
from .skid import MASK64, SIGN_BIT, to_signed

VERSION_MARKER = 0x8D
DEFAULT_VARIANT = 0x8D
MAX_VARIANT = 0xBF
SIGN_TOGGLE = 0x80000000
MAC_KEY_LEN = 32
SKEID_LEN = 16
MAC_SLICE = slice(12, 16)

UuidLike = Union[bytes, bytearray, memoryview, str, uuid.UUID]


@dataclass(frozen=True)
class ParsedSkeid:
    skid: int
    epoch_index: int
    entity_type: int
    variant: int
    secure_origin: bool = False


def _check_byte(name: str, value: int) -> None:
    if not 0 <= value <= 0xFF:
        raise FieldOutOfRange(name, value, 0, 0xFF)


def _check_mac_key(mac_key: bytes) -> None:
    if len(mac_key) != MAC_KEY_LEN:
        raise ValueError(f"MAC key must be {MAC_KEY_LEN} bytes, got {len(mac_key)}")


def compute_mac(buffer: bytes, mac_key: bytes) -> bytes:
    """4-byte MAC over ``buffer`` with bytes 12..15 zeroed. Epoch byte included."""
    if len(buffer) != SKEID_LEN:
        raise ValueError(f"SKEID buffer must be {SKEID_LEN} bytes")
    return blake3(bytes(buffer[:12]) + b"\0\0\0\0", key=mac_key).digest(length=4)


def verify_mac(skeid: bytes, mac_key: bytes) -> bool:
    if len(skeid) != SKEID_LEN:
        return False
    return hmac.compare_digest(bytes(skeid[MAC_SLICE]), compute_mac(skeid, mac_key))


def layout_without_mac(skid: int, epoch_index: int, entity_type: int, variant: int) -> bytearray:
    raw = skid & MASK64
    upper = (raw >> 32) ^ SIGN_TOGGLE
    lower = raw & 0xFFFFFFFF
    buf = bytearray(SKEID_LEN)
    buf[0] = epoch_index
    buf[1:5] = upper.to_bytes(4, "big")
    buf[5] = lower >> 24
    buf[6] = VERSION_MARKER
    buf[7] = entity_type
    buf[8] = variant
    buf[9:12] = (lower & 0xFFFFFF).to_bytes(3, "big")
    return buf


def build_skeid(
    skid: int,
    epoch_index: int,
    entity_type: int,
    mac_key: bytes,
    variant: int = DEFAULT_VARIANT,
) -> bytes:
    """Plaintext SKEID bytes for ``skid``, MAC included."""
    if not -SIGN_BIT <= skid <= MASK64:
        raise FieldOutOfRange("skid", skid, -SIGN_BIT, MASK64)
    _check_byte("epoch_index", epoch_index)
    _check_byte("entity_type", entity_type)
    if not DEFAULT_VARIANT <= variant <= MAX_VARIANT:
        raise InvalidVariant(f"variant {variant:#04x} outside 0x8d..0xbf")
    _check_mac_key(mac_key)
    buf = layout_without_mac(skid, epoch_index, entity_type, variant)
    buf[MAC_SLICE] = blake3(bytes(buf), key=mac_key).digest(length=4)
    return bytes(buf)


def rebuild_with_variant(skeid: bytes, variant: int, mac_key: bytes) -> bytes:
    """Same identifier with another variant byte and a fresh MAC."""
    buf = bytearray(skeid)
    buf[8] = variant
    buf[MAC_SLICE] = b"\0\0\0\0"
    buf[MAC_SLICE] = blake3(bytes(buf), key=mac_key).digest(length=4)
    return bytes(buf)


def extract_skid(skeid: bytes) -> int:
    if len(skeid) != SKEID_LEN:
        raise MalformedLayout(f"expected {SKEID_LEN} bytes, got {len(skeid)}")
    if skeid[6] != VERSION_MARKER:
        raise MalformedLayout(f"version marker is {skeid[6]:#04x}, expected 0x8d")
    upper = int.from_bytes(skeid[1:5], "big") ^ SIGN_TOGGLE
    lower = (skeid[5] << 24) | int.from_bytes(skeid[9:12], "big")
    return to_signed((upper << 32) | lower)


def describe(skeid: bytes) -> ParsedSkeid:
    """Read the plaintext fields without checking the MAC."""
    return ParsedSkeid(extract_skid(skeid), skeid[0], skeid[7], skeid[8])


def to_uuid_string(data: bytes) -> str:
    return str(uuid.UUID(bytes=bytes(data)))


def to_bytes(value: UuidLike) -> bytes:
    """Normalize a UUID string, ``uuid.UUID`` or 16 raw bytes (network order)."""
    if isinstance(value, uuid.UUID):
        return value.bytes
    if isinstance(value, str):
        return uuid.UUID(value.strip()).bytes
    data = bytes(value)
    if len(data) != SKEID_LEN:
        raise ValueError(f"expected {SKEID_LEN} bytes, got {len(data)}")
    return data
