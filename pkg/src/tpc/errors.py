"""Exception types shared across the package."""


class TpcError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(TpcError):
    """Inputs have inconsistent or indivisible dimensions."""


class InsufficientDataError(TpcError):
    """Not enough raw samples to build or fit the requested object.

    Carries the minimum number of samples so callers can report it.
    """

    def __init__(self, message: str, minimum: int | None = None):
        super().__init__(message)
        self.minimum = minimum


class RankDeficientError(TpcError):
    """A regressor matrix is numerically rank deficient."""

    def __init__(self, message: str, matrix_name: str = "", numerical_rank: int | None = None):
        super().__init__(message)
        self.matrix_name = matrix_name
        self.numerical_rank = numerical_rank


class SingularSystemError(TpcError):
    """A linear system that the method requires to be invertible is singular."""


class NotConvergedError(TpcError):
    """An iterative solver failed to reach its tolerance.

    ``iterations`` and ``residual`` describe the final state of the iteration.
    """

    def __init__(self, message: str, iterations: int, residual: float):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual
