"""Exception hierarchy shared by all modules."""


class MoyalError(Exception):
    """Base class for library errors."""


class DimensionError(MoyalError, ValueError):
    """Odd, nonpositive or mismatched dimensions."""


class DomainError(MoyalError, ValueError):
    """Input outside the mathematical domain of an operation."""


class PreconditionError(MoyalError, ValueError):
    """A documented precondition does not hold (e.g. non-adapted structure)."""


class NumericalError(MoyalError, ArithmeticError):
    """A numerical step failed; ``residual`` carries the offending size."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DivergentIntegralError(MoyalError, ArithmeticError):
    """Gaussian integral whose real quadratic part is not positive definite."""

    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class QuadratureError(MoyalError, ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, abs_error=None):
        super().__init__(message)
        self.abs_error = abs_error


class ConstraintError(MoyalError, ValueError):
    """External positions violate a vertex delta constraint."""
