"""Exception types shared across the package."""


class AsrgaError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(AsrgaError, ValueError):
    """Array shapes do not agree with each other or with a manifold."""


class ParameterError(AsrgaError, ValueError):
    """A scalar parameter is outside its admissible range."""


class InfeasiblePointError(AsrgaError, ValueError):
    """A point is too far from the manifold to be silently corrected."""


class NumericError(AsrgaError, ArithmeticError):
    """An evaluation produced NaN or infinite values."""


class UnavailableError(AsrgaError, LookupError):
    """A quantity cannot be computed from the information supplied."""


class SolverAborted(NumericError):
    """A solver run stopped on a non-finite quantity.

    The partial result (trace up to the failing iteration) is kept on
    ``result`` for diagnostics.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
