"""Exception types raised across the package."""


class ConfigurationError(ValueError):
    """Invalid run parameters (unknown preset, non-positive step, ...).

    ``field`` names the missing or offending key when known.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class DimensionError(ValueError):
    """Array shapes that cannot be reconciled."""


class ValidationError(ValueError):
    """A value violates a documented invariant.

    ``field`` names the offending configuration key or argument when known.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class NumericalError(ArithmeticError):
    """A matrix that must be invertible or positive definite is not."""


class ConvergenceError(RuntimeError):
    """Fixed-point iteration did not settle within its budget."""

    def __init__(self, message, residual=float("nan"), iterations=0, step=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.step = step
