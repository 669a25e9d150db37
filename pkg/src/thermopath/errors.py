"""Exception hierarchy shared by every module.

Each class maps onto one CLI exit code (see ``thermopath.cli``).
"""


class ThermopathError(Exception):
    """Base class for all library errors."""

    exit_code = 3


class DomainError(ThermopathError, ValueError):
    """An argument lies outside its mathematical domain (t outside [0, 1], C < 1, ...)."""

    exit_code = 2


class ConfigurationError(ThermopathError, ValueError):
    """A configuration document or argument combination is invalid."""

    exit_code = 2


class SupportError(ThermopathError):
    """A density was evaluated outside its support where a finite value was required."""

    def __init__(self, message, theta=None, which=None):
        super().__init__(message)
        self.theta = theta
        self.which = which


class NumericError(ThermopathError):
    """A non-finite value appeared where the algorithm needs a finite one."""

    def __init__(self, message, theta=None):
        super().__init__(message)
        self.theta = theta


class DegeneratePathError(ThermopathError):
    """The path endpoints coincide (KL_t is identically zero), so t* is undefined."""

    exit_code = 4


class ChainError(ThermopathError):
    """Wraps a sampler failure with the temperature at which it happened."""

    def __init__(self, message, t=None, seed=None, cause=None):
        super().__init__(message)
        self.t = t
        self.seed = seed
        self.cause = cause
        if cause is not None:
            self.exit_code = getattr(cause, "exit_code", 3)
