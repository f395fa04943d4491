"""Exception types shared across the simulator."""


class PendlinkError(Exception):
    """Base class for all simulator errors."""


class InvalidInputError(PendlinkError):
    """An argument violates a documented precondition."""


class InvalidDesignError(PendlinkError):
    """A component set produces a non-realizable (unstable) filter."""


class NumericFailureError(PendlinkError):
    """A computation produced NaN/inf or left the representable range."""


class MetricUndefinedError(PendlinkError):
    """A signal metric has no defined value for this input (e.g. silence)."""


class ConfigError(PendlinkError):
    """A config file or override could not be parsed or validated."""
