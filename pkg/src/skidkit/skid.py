"""64-bit SKIDs: bit packing and the per-instance generator.

Layout, most significant bit first::

    [63] sign (1 = first epoch half)  [62..31] 250 ms ticks
    [30..24] app id  [23..18] app instance id  [17..0] sequence
"""
from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, NamedTuple, Optional

from . import clocking
from .clocking import (
    DriftVerdict,
    EpochConfig,
    Half,
    TickReading,
    TickState,
    TimeSource,
    current_tick,
    join_tick,
)
from .errors import Backpressure, ClockDriftCritical, FieldOutOfRange
from .sequence import SEQUENCE_LIMIT, SequenceScope

TIMESTAMP_SHIFT = 31
APP_SHIFT = 24
INSTANCE_SHIFT = 18
MAX_APP_ID = 0x7F
MAX_INSTANCE_ID = 0x3F
MAX_SEQUENCE = SEQUENCE_LIMIT - 1
MAX_TIMESTAMP = 0xFFFFFFFF

SIGN_BIT = 1 << 63
MASK64 = (1 << 64) - 1


class SkidFields(NamedTuple):
    first_half: bool
    timestamp32: int
    app_id: int
    app_instance_id: int
    sequence_id: int

    @property
    def half(self) -> Half:
        return Half.FIRST if self.first_half else Half.SECOND

    @property
    def elapsed_ticks(self) -> int:
        return join_tick(self.half, self.timestamp32)


def _check(name: str, value: int, high: int) -> None:
    if not 0 <= value <= high:
        raise FieldOutOfRange(name, value, 0, high)


def pack(fields: SkidFields) -> int:
    """Pack fields into a signed 64-bit integer."""
    first_half, ts, app, inst, seq = fields
    _check("timestamp32", ts, MAX_TIMESTAMP)
    _check("app_id", app, MAX_APP_ID)
    _check("app_instance_id", inst, MAX_INSTANCE_ID)
    _check("sequence_id", seq, MAX_SEQUENCE)
    raw = (ts << TIMESTAMP_SHIFT) | (app << APP_SHIFT) | (inst << INSTANCE_SHIFT) | seq
    return raw - SIGN_BIT if first_half else raw


def unpack(skid: int) -> SkidFields:
    """Inverse of :func:`pack`. Accepts signed or unsigned 64-bit input."""
    if not -SIGN_BIT <= skid <= MASK64:
        raise FieldOutOfRange("skid", skid, -SIGN_BIT, MASK64)
    raw = skid & MASK64
    return SkidFields(
        bool(raw & SIGN_BIT),
        (raw >> TIMESTAMP_SHIFT) & MAX_TIMESTAMP,
        (raw >> APP_SHIFT) & MAX_APP_ID,
        (raw >> INSTANCE_SHIFT) & MAX_INSTANCE_ID,
        raw & MAX_SEQUENCE,
    )


def to_signed(value: int) -> int:
    value &= MASK64
    return value - (1 << 64) if value & SIGN_BIT else value


def to_hex(skid: int) -> str:
    """Two's-complement hex, 16 digits, e.g. ``8bebc20012040005``."""
    return f"{skid & MASK64:016x}"


def from_hex(text: str) -> int:
    text = text.strip().lower().replace("_", "")
    if text.startswith("0x"):
        text = text[2:]
    if not text or len(text) > 16:
        raise ValueError(f"not a 64-bit hex value: {text!r}")
    return to_signed(int(text, 16))


@dataclass(frozen=True)
class GeneratorIdentity:
    """Topology slot for one generator: epoch, app id, instance id.

    ``entity_types`` optionally maps entity names to their type byte.
    """

    app_id: int
    app_instance_id: int
    epoch_index: int = 0
    entity_types: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        _check("app_id", self.app_id, MAX_APP_ID)
        _check("app_instance_id", self.app_instance_id, MAX_INSTANCE_ID)
        _check("epoch_index", self.epoch_index, 0xFF)
        for name, value in self.entity_types.items():
            _check(f"entity_types[{name!r}]", value, 0xFF)

    @property
    def epoch(self) -> EpochConfig:
        return EpochConfig(self.epoch_index)

    def entity_type(self, entity: int | str) -> int:
        if isinstance(entity, str):
            return self.entity_types[entity]
        _check("entity_type", entity, 0xFF)
        return entity


class SkidGenerator:
    """Issues SKIDs for one (app, instance) slot.

    Sequences are kept per entity type, so SKIDs are unique and strictly
    increasing per entity type; different entity types may share values.
    After a critical clock drift the generator refuses all further work.
    """

    def __init__(
        self,
        identity: GeneratorIdentity,
        time_source: TimeSource = clocking.system_time_ns,
        sleep: Callable[[float], None] = time.sleep,
        freeze_threshold_secs: float = clocking.DEFAULT_FREEZE_THRESHOLD_SECS,
    ) -> None:
        self.identity = identity
        self.epoch = identity.epoch
        self.time_source = time_source
        self.sleep = sleep
        self.state = TickState(freeze_threshold_secs)
        self.halted = False
        self._scopes: Dict[int, SequenceScope] = {}
        self._lock = threading.Lock()
        self._start_ns = self.epoch.start_ns
        self._topology = (identity.app_id << APP_SHIFT) | (identity.app_instance_id << INSTANCE_SHIFT)

    def _scope(self, entity_type: int) -> SequenceScope:
        scope = self._scopes.get(entity_type)
        if scope is None:
            scope = self._scopes.setdefault(entity_type, SequenceScope(entity_type))
        return scope

    def _effective_tick(self) -> int:
        now = self.time_source()
        tick = (now - self._start_ns) // clocking.TICK_NS
        state = self.state
        last = state.last_observed_tick
        # fast path: clock moving forward inside the epoch
        if last is not None and last <= tick < clocking.TICKS_PER_EPOCH and not self.halted:
            state.last_observed_tick = tick
            state.frozen = False
            return tick
        return self._read_slow(now).tick

    def _read_slow(self, now_ns: int) -> TickReading:
        if self.halted:
            raise ClockDriftCritical("generator halted after critical clock drift")
        verdict, reading = current_tick(now_ns, self.epoch, self.state)
        if verdict is DriftVerdict.CRITICAL:
            self.halted = True
            raise ClockDriftCritical(
                "wall clock moved backwards beyond "
                f"{self.state.freeze_threshold_secs}s; restart with a new instance id")
        return reading

    def read_tick(self) -> TickReading:
        """Current effective tick after drift handling."""
        with self._lock:
            return clocking.split_tick(self._effective_tick())

    def _wait_past(self, tick: int) -> None:
        boundary = self.epoch.tick_start_ns(tick + 1)
        self.sleep(max(boundary - self.time_source(), 0) / clocking.NS_PER_SECOND)

    def _base(self, tick: int) -> int:
        raw = ((tick & MAX_TIMESTAMP) << TIMESTAMP_SHIFT) | self._topology
        return raw - SIGN_BIT if tick < clocking.TICKS_PER_HALF else raw

    def generate(self, entity_type: int | str = 0, block: bool = True) -> int:
        """Next SKID for ``entity_type``.

        With ``block=False`` a full tick raises :class:`Backpressure`;
        otherwise the call sleeps until the next tick boundary and retries.
        """
        scope = self._scopes.get(entity_type) if type(entity_type) is int else None
        if scope is None:
            scope = self._scope(self.identity.entity_type(entity_type))
        with self._lock:
            while True:
                tick = self._effective_tick()
                seq = scope.next_sequence(tick)
                if seq is not None:
                    return self._base(tick) | seq
                if not block:
                    raise Backpressure(
                        f"{SEQUENCE_LIMIT} identifiers already issued in tick {tick}")
                self._wait_past(tick)

    def try_generate(self, entity_type: int | str = 0) -> Optional[int]:
        """Like ``generate(block=False)`` but returns ``None`` on backpressure."""
        try:
            return self.generate(entity_type, block=False)
        except Backpressure:
            return None

    def generate_batch(self, entity_type: int | str, count: int) -> List[int]:
        """``count`` consecutive SKIDs, reserving sequence blocks per tick.

        Blocks across tick boundaries when one tick cannot hold the batch.
        """
        scope = self._scope(self.identity.entity_type(entity_type))
        out: List[int] = []
        with self._lock:
            while len(out) < count:
                tick = self._effective_tick()
                first, granted = scope.reserve(tick, count - len(out))
                if granted:
                    base = self._base(tick)
                    # seq occupies the low bits, so OR equals addition here
                    out.extend(range(base + first, base + first + granted))
                else:
                    self._wait_past(tick)
        return out


def generate_skid(generator: SkidGenerator, entity_type: int | str = 0, block: bool = True) -> int:
    return generator.generate(entity_type, block=block)
