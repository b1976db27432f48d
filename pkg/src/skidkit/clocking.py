"""Epoch addressing, 250 ms ticks and clock-drift handling.

Instants are integer nanoseconds since the Unix epoch (POSIX time, no leap
seconds). Integers keep ``floor(elapsed * 4)`` exact, which floats do not.
"""
from __future__ import annotations

import enum
import threading
import time
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

from .errors import EpochExhausted, EpochNotStarted, FieldOutOfRange

NS_PER_SECOND = 1_000_000_000
TICK_NS = 250_000_000
TICKS_PER_HALF = 1 << 32
TICKS_PER_EPOCH = 1 << 33
EPOCH_WINDOW_SECONDS = 1 << 31
BASE_EPOCH_SECONDS = 1_735_689_600  # 2025-01-01T00:00:00Z
DEFAULT_FREEZE_THRESHOLD_SECS = 5.0

TimeSource = Callable[[], int]


def system_time_ns() -> int:
    return time.time_ns()


class CivilTime(NamedTuple):
    """Proleptic Gregorian UTC date-time; unlike ``datetime`` it has no year cap."""

    year: int
    month: int
    day: int
    hour: int
    minute: int
    second: int

    def isoformat(self) -> str:
        return (f"{self.year:04d}-{self.month:02d}-{self.day:02d}"
                f"T{self.hour:02d}:{self.minute:02d}:{self.second:02d}Z")


def civil_from_posix(seconds: int) -> CivilTime:
    # Howard Hinnant's civil_from_days, valid for any integer day count
    days, rem = divmod(seconds, 86_400)
    z = days + 719_468
    era = z // 146_097
    doe = z - era * 146_097
    yoe = (doe - doe // 1460 + doe // 36_524 - doe // 146_096) // 365
    y = yoe + era * 400
    doy = doe - (365 * yoe + yoe // 4 - yoe // 100)
    mp = (5 * doy + 2) // 153
    d = doy - (153 * mp + 2) // 5 + 1
    m = mp + 3 if mp < 10 else mp - 9
    if m <= 2:
        y += 1
    hour, rem = divmod(rem, 3600)
    minute, second = divmod(rem, 60)
    return CivilTime(y, m, d, hour, minute, second)


def _check_epoch_index(epoch_index: int) -> None:
    if not 0 <= epoch_index <= 0xFF:
        raise FieldOutOfRange("epoch_index", epoch_index, 0, 0xFF)


@dataclass(frozen=True)
class EpochConfig:
    epoch_index: int = 0

    def __post_init__(self) -> None:
        _check_epoch_index(self.epoch_index)

    @property
    def start_seconds(self) -> int:
        return BASE_EPOCH_SECONDS + self.epoch_index * EPOCH_WINDOW_SECONDS

    @property
    def end_seconds(self) -> int:
        return self.start_seconds + EPOCH_WINDOW_SECONDS

    @property
    def start_ns(self) -> int:
        return self.start_seconds * NS_PER_SECOND

    def elapsed_ticks(self, now_ns: int) -> int:
        """Floor of 250 ms ticks since the epoch start; negative before it."""
        return (now_ns - self.start_ns) // TICK_NS

    def tick_start_ns(self, tick: int) -> int:
        return self.start_ns + tick * TICK_NS


class EpochBounds(NamedTuple):
    start_seconds: int
    end_seconds: int

    @property
    def start(self) -> CivilTime:
        return civil_from_posix(self.start_seconds)

    @property
    def end(self) -> CivilTime:
        return civil_from_posix(self.end_seconds)


def epoch_bounds(epoch_index: int) -> EpochBounds:
    """Start and end (exclusive) of an epoch window, in POSIX seconds."""
    cfg = EpochConfig(epoch_index)
    return EpochBounds(cfg.start_seconds, cfg.end_seconds)


class Half(enum.Enum):
    FIRST = "first"    # sign bit 1, negative SKIDs
    SECOND = "second"  # sign bit 0, positive SKIDs


class TickReading(NamedTuple):
    half: Half
    timestamp32: int
    tick: int

    @property
    def first_half(self) -> bool:
        return self.half is Half.FIRST


def split_tick(tick: int) -> TickReading:
    if not 0 <= tick < TICKS_PER_EPOCH:
        raise EpochExhausted(f"elapsed tick {tick} outside the epoch")
    half = Half.FIRST if tick < TICKS_PER_HALF else Half.SECOND
    return TickReading(half, tick & (TICKS_PER_HALF - 1), tick)


def join_tick(half: Half, timestamp32: int) -> int:
    return (0 if half is Half.FIRST else TICKS_PER_HALF) + timestamp32


class DriftVerdict(enum.Enum):
    PROCEED = "proceed"
    FROZEN = "frozen"
    CRITICAL = "critical"


class TickState:
    """Last observed tick plus the freeze/critical drift policy.

    Updates are serialized by an internal lock so the observed tick can only
    move forward, whatever the thread interleaving.
    """

    def __init__(self, freeze_threshold_secs: float = DEFAULT_FREEZE_THRESHOLD_SECS) -> None:
        if freeze_threshold_secs < 0:
            raise ValueError("freeze_threshold_secs must be non-negative")
        self.freeze_threshold_secs = freeze_threshold_secs
        self.last_observed_tick: Optional[int] = None
        self.frozen = False
        self.lock = threading.RLock()

    def __repr__(self) -> str:
        return (f"TickState(last_observed_tick={self.last_observed_tick}, "
                f"frozen={self.frozen}, "
                f"freeze_threshold_secs={self.freeze_threshold_secs})")


def observe_drift(now_tick: int, state: TickState) -> DriftVerdict:
    """Classify ``now_tick`` against the last observed tick.

    Does not modify ``state``; ``current_tick`` applies the verdict.
    """
    last = state.last_observed_tick
    if last is None or now_tick >= last:
        return DriftVerdict.PROCEED
    backwards_secs = (last - now_tick) * TICK_NS / NS_PER_SECOND
    if backwards_secs <= state.freeze_threshold_secs:
        return DriftVerdict.FROZEN
    return DriftVerdict.CRITICAL


def current_tick(now_ns: int, epoch: EpochConfig, state: TickState) -> tuple[DriftVerdict, Optional[TickReading]]:
    """Read the effective tick for ``now_ns``.

    Returns ``(CRITICAL, None)`` on a large backwards jump and leaves the
    state untouched; the caller decides how to shut down. A frozen reading
    repeats the last observed tick.
    """
    tick = epoch.elapsed_ticks(now_ns)
    with state.lock:
        verdict = observe_drift(tick, state)
        if verdict is DriftVerdict.CRITICAL:
            return verdict, None
        if verdict is DriftVerdict.FROZEN:
            state.frozen = True
            return verdict, split_tick(state.last_observed_tick)
        if tick < 0:
            raise EpochNotStarted(
                f"now is {-tick * TICK_NS / NS_PER_SECOND:.3f}s before epoch "
                f"{epoch.epoch_index:#04x} starts")
        reading = split_tick(tick)
        state.last_observed_tick = tick
        state.frozen = False
        return verdict, reading


class ScriptedClock:
    """Deterministic time source for tests and ``--test-clock``.

    Each read consumes the next scripted instant (the last one repeats);
    ``sleep`` advances every later reading by the slept amount.
    """

    def __init__(self, instants_ns: Sequence[int], step_ns: int = 0) -> None:
        if not instants_ns:
            raise ValueError("a scripted clock needs at least one instant")
        self._instants = list(instants_ns)
        self._index = 0
        self._offset = 0
        self.step_ns = step_ns
        self.reads = 0
        self._lock = threading.Lock()

    @classmethod
    def at_epoch_offset(cls, seconds: float, epoch: EpochConfig = EpochConfig(), step_ns: int = 0) -> "ScriptedClock":
        return cls([epoch.start_ns + round(seconds * NS_PER_SECOND)], step_ns)

    def __call__(self) -> int:
        with self._lock:
            now = self._instants[self._index] + self._offset
            if self._index < len(self._instants) - 1:
                self._index += 1
            else:
                self._offset += self.step_ns
            self.reads += 1
            return now

    def peek(self) -> int:
        return self._instants[self._index] + self._offset

    def sleep(self, seconds: float) -> None:
        with self._lock:
            self._offset += max(0, round(seconds * NS_PER_SECOND))

    def advance(self, seconds: float) -> None:
        self.sleep(seconds)

    def jump_to(self, now_ns: int) -> None:
        """Replace the script with a single instant (sleep offset reset)."""
        with self._lock:
            self._instants = [now_ns]
            self._index = 0
            self._offset = 0


def parse_clock_script(script: str, epoch: EpochConfig) -> ScriptedClock:
    """Build a ScriptedClock from ``"100,99.5,90"``: seconds past the epoch start."""
    try:
        offsets = [float(part) for part in script.split(",") if part.strip()]
    except ValueError as exc:
        raise ValueError(f"bad clock script {script!r}") from exc
    return ScriptedClock([epoch.start_ns + round(s * NS_PER_SECOND) for s in offsets])
