"""Exception hierarchy shared by all flatpop modules."""


class FlatpopError(Exception):
    """Base class for all library errors."""


class InvalidArgumentError(FlatpopError, ValueError):
    """An argument violates a documented precondition."""


class UnsupportedBackendError(FlatpopError, TypeError):
    """The operation is not defined for the given metric-space backend."""


class ConfigurationError(FlatpopError, ValueError):
    """A model, flow or scenario configuration is inconsistent."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class ModelValidationError(FlatpopError):
    """Sampled model values exceed their declared bounds."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ConvergenceError(FlatpopError, RuntimeError):
    """A fixed-point iteration did not reach its tolerance."""

    def __init__(self, message, residuals=()):
        super().__init__(message)
        self.residuals = list(residuals)

    @property
    def last_residual(self):
        return self.residuals[-1] if self.residuals else float("nan")
