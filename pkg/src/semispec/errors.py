"""Exception types shared across the package."""


class SymbolError(ValueError):
    """Malformed symbol or a symbol violating a structural requirement."""


class EllipticityError(ValueError):
    """Raised when an operation needs an elliptic quadratic form and gets something else."""


class AmbiguousMultiplicityError(ArithmeticError):
    """Eigenvalue clusters whose generalized multiplicity cannot be resolved reliably."""


class ConvergenceError(RuntimeError):
    """A numerical procedure failed to reach its stated tolerance."""


class QuadratureError(ConvergenceError):
    """Weighted quadrature did not stabilise under grid doubling."""

    def __init__(self, message, grid_report=None):
        super().__init__(message)
        self.grid_report = list(grid_report or [])


class RegionError(ValueError):
    """No admissible point can be constructed in the requested region."""


class ConfigError(ValueError):
    """Invalid experiment configuration."""
