"""Exception hierarchy shared by all modules."""


class MrconvError(Exception):
    """Base class for library errors."""


class ParameterError(MrconvError, ValueError):
    """Invalid distribution, bandwidth or estimator parameter."""


class MatrixError(MrconvError, ValueError):
    """Correlation matrix is not a valid (symmetric PD, unit diagonal) matrix."""


class SingularDesignError(MrconvError, ArithmeticError):
    """Design matrix too ill-conditioned for a least squares fit."""

    def __init__(self, condition_number, message=None):
        self.condition_number = float(condition_number)
        if message is None:
            message = (
                f"design matrix is rank deficient "
                f"(condition number {self.condition_number:.3e} > 1e12)"
            )
        super().__init__(message)


class DegenerateDataError(MrconvError, ValueError):
    """Data with zero spread where a bandwidth is required."""


class AccuracyError(MrconvError, ArithmeticError):
    """Requested Gauss transform accuracy is unattainable."""


class GridError(MrconvError, ValueError):
    """Evaluation grids are malformed or do not match."""


class InsufficientDataError(MrconvError, ValueError):
    """Too few usable points to fit a convergence slope."""


class CellError(MrconvError):
    """Failure inside one (N, tau) cell of a Monte Carlo study."""

    def __init__(self, n_complete, tau, cause):
        self.n_complete = n_complete
        self.tau = tau
        self.cause = cause
        super().__init__(f"cell N={n_complete}, tau={tau}: {cause}")
