import os
import sys
from datetime import datetime, timezone

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from skidkit import GeneratorIdentity, KeyRing, ScriptedClock, SkidGenerator  # noqa: E402
from skidkit.clocking import EpochConfig  # noqa: E402

ZERO_SECRET = bytes(32)
T0 = datetime(2025, 6, 1, tzinfo=timezone.utc)


class ForcedCollisions:
    """Collision predicate that reports the first ``k`` ciphertexts it sees as colliding.

    Ciphertexts flagged once stay flagged, so later backward verification
    sees the same answer the generator saw.
    """

    def __init__(self, k):
        self.remaining = k
        self.colliding = set()
        self.calls = 0

    def __call__(self, ciphertext, mac_key):
        self.calls += 1
        if ciphertext in self.colliding:
            return True
        if self.remaining > 0:
            self.remaining -= 1
            self.colliding.add(bytes(ciphertext))
            return True
        return False


@pytest.fixture
def zero_ring():
    return KeyRing.single(ZERO_SECRET, key_id="zero", created_at=T0)


@pytest.fixture
def keys(zero_ring):
    entry = zero_ring.default
    return entry.mac_key, entry.aes_key


@pytest.fixture
def clock():
    return ScriptedClock.at_epoch_offset(0.0)


@pytest.fixture
def generator(clock):
    return SkidGenerator(GeneratorIdentity(18, 1, 0), clock, clock.sleep)


@pytest.fixture
def epoch0():
    return EpochConfig(0)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
