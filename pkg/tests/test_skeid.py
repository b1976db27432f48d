import random
import uuid

import pytest
from hypothesis import given, strategies as st

from oracles.blake3_ref import blake3_keyed
from skidkit import build_skeid, compute_mac, extract_skid, verify_mac
from skidkit.errors import InvalidVariant, MalformedLayout
from skidkit.skeid import describe, to_bytes, to_uuid_string
from skidkit.skid import to_signed
from test_oracles import WALKTHROUGH_MAC_DERIVED, WALKTHROUGH_MAC_ZERO_KEY, ZERO_MAC_KEY

WALKTHROUGH = to_signed(0x8BEBC20012040005)
ZERO_KEY = bytes(32)

skids = st.integers(-(2**63), 2**63 - 1)


def test_walkthrough_layout():
    data = build_skeid(WALKTHROUGH, 0x00, 0x0A, ZERO_MAC_KEY)
    assert data[:12].hex() == "000bebc200128d0a8d040005"
    assert data[12:] == WALKTHROUGH_MAC_DERIVED


def test_zero_skid_layout():
    data = build_skeid(to_signed(0x8000000000000000), 0, 0, ZERO_KEY)
    assert data[:12].hex() == "0000000000008d008d000000"


def test_mac_pinned_with_zero_key():
    buf = bytes.fromhex("000bebc200128d0a8d040005") + bytes(4)
    assert compute_mac(buf, ZERO_KEY) == WALKTHROUGH_MAC_ZERO_KEY


def test_mac_ignores_mac_field():
    buf = bytes(range(16))
    other = buf[:12] + b"\xde\xad\xbe\xef"
    assert compute_mac(buf, ZERO_KEY) == compute_mac(other, ZERO_KEY)


def test_mac_covers_epoch():
    buf = bytes.fromhex("000bebc200128d0a8d040005") + bytes(4)
    flipped = b"\x01" + buf[1:]
    assert compute_mac(flipped, ZERO_KEY) != compute_mac(buf, ZERO_KEY)
    assert compute_mac(flipped, ZERO_KEY) == blake3_keyed(ZERO_KEY, flipped)[:4]


@given(skids, st.integers(0, 255), st.integers(0, 255), st.integers(0x8D, 0xBF), st.binary(min_size=32, max_size=32))
def test_build_matches_oracle(skid, epoch, entity, variant, key):
    data = build_skeid(skid, epoch, entity, key, variant)
    assert data[12:] == blake3_keyed(key, data[:12] + bytes(4))[:4]
    assert extract_skid(data) == skid
    assert (data[0], data[6], data[7], data[8]) == (epoch, 0x8D, entity, variant)


def test_build_extract_roundtrip_random():
    rng = random.Random(7)
    for _ in range(100_000):
        skid = rng.getrandbits(64) - 2**63
        data = build_skeid(skid, rng.randrange(256), rng.randrange(256), ZERO_KEY)
        assert extract_skid(data) == skid


@pytest.mark.parametrize("variant", [0x8C, 0xC0, 0x00])
def test_invalid_variant(variant):
    with pytest.raises(InvalidVariant):
        build_skeid(0, 0, 0, ZERO_KEY, variant)


def test_extract_rejects_missing_marker():
    data = bytearray(build_skeid(0, 0, 0, ZERO_KEY))
    data[6] = 0x8C
    with pytest.raises(MalformedLayout):
        extract_skid(bytes(data))


def test_verify_mac_and_single_byte_flips():
    data = build_skeid(WALKTHROUGH, 0, 10, ZERO_MAC_KEY)
    assert verify_mac(data, ZERO_MAC_KEY)
    for i in range(12):
        for bit in range(8):
            tampered = bytearray(data)
            tampered[i] ^= 1 << bit
            assert not verify_mac(bytes(tampered), ZERO_MAC_KEY), (i, bit)


def test_wrong_keys_fail():
    rng = random.Random(3)
    data = build_skeid(WALKTHROUGH, 0, 10, ZERO_MAC_KEY)
    failures = sum(not verify_mac(data, rng.randbytes(32)) for _ in range(10_000))
    assert failures == 10_000


def test_lexicographic_order_follows_skid_order():
    rng = random.Random(11)
    values = sorted(rng.getrandbits(64) - 2**63 for _ in range(2000))
    built = [build_skeid(v, 3, 9, ZERO_KEY) for v in values]
    assert built == sorted(built)
    strings = [to_uuid_string(b) for b in built]
    assert strings == sorted(strings)


def test_epoch_byte_dominates():
    low = build_skeid(2**63 - 1, 4, 255, ZERO_KEY)
    high = build_skeid(-(2**63), 5, 0, ZERO_KEY)
    assert low < high


@given(skids, skids)
def test_skid_difference_shows_before_mac(a, b):
    if a == b:
        return
    x, y = build_skeid(a, 0, 0, ZERO_KEY), build_skeid(b, 0, 0, ZERO_KEY)
    first_diff = next(i for i in range(16) if x[i] != y[i])
    assert first_diff < 12


def test_uuid_string_forms():
    data = build_skeid(WALKTHROUGH, 0, 10, ZERO_MAC_KEY)
    text = to_uuid_string(data)
    assert text == text.lower()
    assert str(uuid.UUID(text)) == text
    assert uuid.UUID(text).version == 8
    assert to_bytes(text.upper()) == data
    assert to_bytes(uuid.UUID(text)) == data
    with pytest.raises(ValueError):
        to_bytes(b"short")


def test_describe():
    data = build_skeid(WALKTHROUGH, 2, 10, ZERO_KEY, 0x90)
    p = describe(data)
    assert (p.skid, p.epoch_index, p.entity_type, p.variant, p.secure_origin) == (
        WALKTHROUGH, 2, 10, 0x90, False)
