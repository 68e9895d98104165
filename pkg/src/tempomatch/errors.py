"""Exception types shared across the package."""


class TempomatchError(Exception):
    """Base class for all package errors."""


class ParameterError(TempomatchError, ValueError):
    """A numeric argument is outside its admissible range."""


class DomainError(TempomatchError, ValueError):
    """A spatial query falls outside the field domain."""


class ConfigError(TempomatchError, ValueError):
    """A run configuration is inconsistent or fails a validity gate."""


class EvaluationError(TempomatchError, RuntimeError):
    """An encoder or template evaluator produced a non-finite value."""

    def __init__(self, message, t=None, theta2=None):
        super().__init__(message)
        self.t = t
        self.theta2 = theta2


class StepError(TempomatchError, RuntimeError):
    """The integrator produced a non-finite state."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t
