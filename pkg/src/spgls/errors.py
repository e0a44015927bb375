"""Exception hierarchy shared by every module."""


class SpglsError(Exception):
    """Base class for all errors raised by this package."""


class DataError(SpglsError, ValueError):
    """Malformed, missing or non-numeric input data."""


class ScalingError(DataError):
    """Label scaling requested on an all-zero label vector."""


class NumericError(SpglsError, ArithmeticError):
    """A linear-algebra routine failed or produced non-finite output."""


class RankError(NumericError):
    """A linear system that must be nonsingular is rank deficient."""


class ConvergenceError(NumericError):
    """An iterative method hit its iteration cap.

    ``bracket`` holds the last enclosing interval, when one exists.
    """

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class InconsistencyError(SpglsError):
    """An internal identity that must hold by construction was violated."""


class RecoveryError(SpglsError):
    """No equilibrium predictor could be extracted from a certificate."""


class UnattainedEquilibriumError(RecoveryError):
    """The optimal value is an infimum approached only as ``|w| -> inf``."""


class DegenerateDualError(RecoveryError):
    """The dual matrix has a vanishing bottom-right entry."""
