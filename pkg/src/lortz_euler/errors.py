"""Exception hierarchy.

Every failure raised by the package derives from :class:`LortzError`, so
callers (and the CLI) can separate physics failures from programming errors.
"""


class LortzError(Exception):
    """Base class for all package errors."""


class ConfigError(LortzError, ValueError):
    """Invalid domain, profile, or run configuration."""


class PointOutsideDomain(LortzError):
    pass


class PeriodOutOfRange(LortzError):
    """A period lies outside the window where the base state can be inverted."""

    def __init__(self, message, period=None):
        super().__init__(message)
        self.period = period


class CutFieldRequiresJump(LortzError):
    pass


class OrbitNotClosed(LortzError):
    pass


class LeftDomain(LortzError):
    pass


class GaugeDegenerate(LortzError):
    pass


class CutMismatch(LortzError):
    pass


class SolverDiverged(LortzError):
    pass


class IncompatibleData(LortzError):
    pass


class DivergenceDetected(LortzError):
    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history


class NotConverged(LortzError):
    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history


class VersionMismatch(LortzError):
    pass


class HashMismatch(LortzError):
    pass
