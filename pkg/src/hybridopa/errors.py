"""Exception hierarchy shared by every module."""


class HybridOpaError(Exception):
    """Base class for all package errors."""


class ValidationError(HybridOpaError, ValueError):
    """A parameter violates a documented invariant."""


class PoleError(HybridOpaError):
    """The compound-cavity reflection has a pole at the requested phase."""


class ModelInconsistencyError(HybridOpaError):
    """A derived quantity left its physical range (e.g. |R| > 1)."""


class BelowThresholdViolation(HybridOpaError):
    """The parametric drive is at or above threshold where a spectrum was requested."""

    def __init__(self, message, delta=None):
        super().__init__(message)
        self.delta = delta


class NoSplitting(HybridOpaError):
    """No off-center extremum of the input decay profile inside the search window."""


class InvariantViolation(HybridOpaError):
    """A computed result violates a physical invariant (e.g. uncertainty relation)."""

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = details or {}


class TrajectoryError(HybridOpaError):
    """Monte Carlo integration produced non-finite values."""

    def __init__(self, message, step=None, seed=None):
        super().__init__(message)
        self.step = step
        self.seed = seed


class ConfigError(HybridOpaError):
    """Base for configuration loading failures."""


class ConfigParseError(ConfigError):
    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column


class ConfigSchemaError(ConfigError):
    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path
