"""Exception hierarchy shared across the package."""


class SparseMMDError(Exception):
    """Base class for all package errors."""


class ContractViolation(SparseMMDError, ValueError):
    """Inputs break a documented precondition (shapes, family, empty data)."""


class NumericInputError(SparseMMDError, ValueError):
    """Inputs contain NaN or infinite values."""


class ParameterDomainError(SparseMMDError, ValueError):
    """A scalar parameter lies outside its admissible domain."""


class DegenerateBandwidthError(SparseMMDError, ValueError):
    """The median heuristic cannot produce a positive bandwidth."""


class CovarianceNotPDError(SparseMMDError, ValueError):
    """A covariance matrix failed its Cholesky factorization."""


class SolverDivergenceError(SparseMMDError, RuntimeError):
    """An iterative solver produced a non-finite gradient or objective.

    Attributes:
        iterate: copy of the parameter vector at which the failure was seen.
    """

    def __init__(self, message, iterate=None):
        super().__init__(message)
        self.iterate = None if iterate is None else iterate.copy()
