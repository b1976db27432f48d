"""Per-tick sequence counters with backpressure."""
from __future__ import annotations

import threading
from typing import Optional

from .errors import TickRegression

SEQUENCE_BITS = 18
SEQUENCE_LIMIT = 1 << SEQUENCE_BITS  # issues per tick


class SequenceScope:
    """Counter for one entity type on one instance.

    ``next_sequence`` is linearizable; concurrent callers never see the same
    (tick, sequence) pair twice.
    """

    __slots__ = ("entity_type", "current_tick", "counter", "_lock")

    def __init__(self, entity_type: int = 0) -> None:
        self.entity_type = entity_type
        self.current_tick: Optional[int] = None
        self.counter = -1  # last issued; -1 means nothing issued in current_tick
        self._lock = threading.Lock()

    def next_sequence(self, tick: int) -> Optional[int]:
        """Next sequence number for ``tick``, or ``None`` once the tick is full."""
        with self._lock:
            current = self.current_tick
            if current is None or tick > current:
                self.current_tick = tick
                self.counter = 0
                return 0
            if tick < current:
                raise TickRegression(f"tick {tick} is behind scope tick {current}")
            if self.counter >= SEQUENCE_LIMIT - 1:
                return None
            self.counter += 1
            return self.counter

    def reserve(self, tick: int, count: int) -> tuple[int, int]:
        """Claim up to ``count`` consecutive sequences in ``tick``.

        Returns ``(first, granted)``; ``granted`` is 0 when the tick is full.
        """
        if count < 1:
            raise ValueError("count must be positive")
        with self._lock:
            current = self.current_tick
            if current is None or tick > current:
                self.current_tick = tick
                self.counter = -1
            elif tick < current:
                raise TickRegression(f"tick {tick} is behind scope tick {current}")
            first = self.counter + 1
            granted = min(count, SEQUENCE_LIMIT - first)
            self.counter += granted
            return first, granted

    def issued_in_current_tick(self) -> int:
        return self.counter + 1 if self.current_tick is not None else 0


def next_sequence_blocking(scope: SequenceScope, read_tick, wait_past_tick) -> tuple[int, int]:
    """Retry ``next_sequence`` until it succeeds.

    ``read_tick()`` returns the current effective tick and
    ``wait_past_tick(t)`` sleeps until the clock should be beyond tick ``t``.
    Returns ``(tick, sequence)``.
    """
    while True:
        tick = read_tick()
        seq = scope.next_sequence(tick)
        if seq is not None:
            return tick, seq
        wait_past_tick(tick)
