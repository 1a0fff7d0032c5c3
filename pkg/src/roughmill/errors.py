"""Exception types raised across roughmill."""


class RoughmillError(Exception):
    """Base class for all library errors."""


class DimensionError(RoughmillError, ValueError):
    """Array shapes, grids or dimensions do not match."""


class DomainError(RoughmillError, ValueError):
    """A scalar argument lies outside its admissible range."""


class UndefinedRatioError(RoughmillError, ValueError):
    pass


class ResolutionError(RoughmillError, ValueError):
    """Requested dyadic depth is finer than the underlying grid."""


class ConfigError(RoughmillError, ValueError):
    """Invalid configuration or missing input records."""


class ConstraintError(ConfigError):
    """A named parameter constraint is violated.

    The ``constraint`` attribute carries the short name of the violated
    condition (e.g. ``"H5 margin"``) so callers can report it verbatim.
    """

    def __init__(self, constraint, message):
        super().__init__(f"{constraint}: {message}")
        self.constraint = constraint


class TimescaleError(RoughmillError, ValueError):
    """Micro step too coarse for the fast time scale."""


class AlignmentError(RoughmillError, ValueError):
    """A block length does not divide the macro grid."""


class ModelError(RoughmillError, RuntimeError):
    """A model coefficient could not be evaluated."""


class InstabilityError(RoughmillError, RuntimeError):
    """Non-finite state produced by a time stepper."""

    def __init__(self, step, message="non-finite state"):
        super().__init__(f"{message} at step {step}")
        self.step = step
