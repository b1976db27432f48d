"""Source Known Identifiers: 64-bit SKIDs, MAC-checked SKEIDs, Secure SKEIDs."""
from .clocking import (
    DriftVerdict,
    EpochConfig,
    Half,
    ScriptedClock,
    TickState,
    current_tick,
    epoch_bounds,
    observe_drift,
)
from .errors import (
    Backpressure,
    ClockDriftCritical,
    EpochExhausted,
    EpochNotStarted,
    FieldOutOfRange,
    JackpotError,
    MalformedLayout,
    SkidError,
)
from .issuer import IdIssuer
from .keyring import KeyEntry, KeyRing, derive_keys, parse_with_fallback, rotate
from .secure import (
    InvalidReason,
    ParseOutcome,
    Tier,
    backward_verify,
    collision_predicate,
    parse_auto,
    to_plain,
    to_secure,
)
from .sequence import SequenceScope, next_sequence_blocking
from .skeid import ParsedSkeid, build_skeid, compute_mac, extract_skid, verify_mac
from .skid import GeneratorIdentity, SkidFields, SkidGenerator, generate_skid, pack, unpack

__version__ = "0.1.0"
