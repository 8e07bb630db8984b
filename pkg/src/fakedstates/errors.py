"""Exception types shared across the package."""


class FakedStatesError(Exception):
    """Base class for all package-specific errors."""


class CurveDomainError(FakedStatesError):
    """Control value lies outside a tabulated efficiency curve's domain."""


class NoSignalError(FakedStatesError):
    """Both detectors are blind at every candidate control value."""


class UndefinedQberError(FakedStatesError):
    """QBER requested but no bits survive sifting (zero arrival probability)."""


class UnsupportedMismatchError(FakedStatesError):
    """Operation only defined for a total efficiency mismatch."""


class PlanError(FakedStatesError):
    """A faked-state plan violates its own construction invariants."""


class ConfigError(FakedStatesError):
    """Scenario configuration is malformed; message names the offending key."""
