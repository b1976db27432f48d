"""Exception hierarchy shared by every tier."""


class SkidError(Exception):
    """Base class for all errors raised by skidkit."""


class FieldOutOfRange(SkidError, ValueError):
    def __init__(self, field: str, value: int, low: int, high: int) -> None:
        super().__init__(f"{field}={value!r} outside {low}..{high}")
        self.field = field
        self.value = value


class EpochNotStarted(SkidError):
    pass


class EpochExhausted(SkidError):
    pass


class ClockDriftCritical(SkidError):
    """Wall clock jumped backwards past the freeze threshold.

    The generator that raised this is halted for good; restart the process
    with a new instance id.
    """


class TickRegression(SkidError):
    pass


class Backpressure(SkidError):
    """Sequence space for the current tick is used up (non-blocking mode)."""


class InvalidVariant(SkidError, ValueError):
    pass


class MalformedLayout(SkidError, ValueError):
    pass


class JackpotError(SkidError):
    """All 51 collision-guard variants collided. Should never happen."""


class BadSecretLength(SkidError, ValueError):
    pass


class EmptyRing(SkidError):
    pass


class DuplicateKeyId(SkidError):
    pass


class CompromisedKey(SkidError):
    pass
