"""Exception types raised by the library."""

__all__ = [
    "BmacError",
    "DimensionError",
    "DomainError",
    "InfeasibleError",
    "PreconditionError",
    "ConvergenceError",
]


class BmacError(Exception):
    """Base class for all library errors."""


class DimensionError(BmacError, ValueError):
    """A matrix or vector does not have the shape its role requires."""


class DomainError(BmacError, ValueError):
    """An input lies outside the mathematical domain of an operation.

    Typical cause: a covariance matrix that is not positive semidefinite.
    """


class InfeasibleError(BmacError, RuntimeError):
    """Rate or SINR targets cannot be met.

    Attributes
    ----------
    radius : float or None
        Spectral radius that certified infeasibility, when available.
    """

    def __init__(self, message, radius=None):
        super().__init__(message)
        self.radius = radius


class PreconditionError(BmacError, ValueError):
    """A structural precondition of an algorithm is violated."""


class ConvergenceError(BmacError, RuntimeError):
    """An iterative method failed to converge within its budget."""
