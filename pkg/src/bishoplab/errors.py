"""Exception hierarchy shared by every module."""


class BishopLabError(Exception):
    """Base class; ``stage`` is filled in by pipelines that abort mid-run."""

    stage: str | None = None


class InsufficientPrecision(BishopLabError):
    """The stored approximation of an angle cannot certify the requested quantity."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class EmptySequence(BishopLabError, ValueError):
    pass


class DomainError(BishopLabError, ValueError):
    """A signed factor with a non-integer power was evaluated left of its zero."""


class OrbitHitsZero(BishopLabError, ZeroDivisionError):
    pass


class DivisionAtZero(BishopLabError, ZeroDivisionError):
    """A backward product passes exactly through a zero of the weight."""


class ThresholdOverflow(BishopLabError, OverflowError):
    """A search or an exponent exceeded its configured budget."""


class TailNotSummable(BishopLabError):
    pass


class NotCovering(BishopLabError):
    pass


class NotErgodic(BishopLabError):
    """Rational rotations have finite orbits, so the ergodic machinery does not apply."""


class ConfigError(BishopLabError, ValueError):
    pass


class DemoAbort(BishopLabError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
