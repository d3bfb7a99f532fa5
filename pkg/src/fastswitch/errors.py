"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Malformed input (matrix, parameter table, configuration field)."""


class ConfigurationError(ValueError):
    """A well-formed request that contradicts a modelling requirement."""


class NumericError(ArithmeticError):
    """NaN or Inf produced by a model callback during integration."""

    def __init__(self, message, time=None, path=None):
        super().__init__(message)
        self.time = time
        self.path = path


class BlowUpError(NumericError):
    """State left the configured guard ball."""


class NoCycleError(RuntimeError):
    """Limit-cycle detection failed."""
