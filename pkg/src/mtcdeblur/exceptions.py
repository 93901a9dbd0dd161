"""Exception types raised across the package."""


class DimensionError(ValueError):
    """Array shape does not match the operator it is applied to."""


class DomainError(ValueError):
    """A scalar argument lies outside its admissible range."""


class DegeneratePsfError(ValueError):
    """The region used to build a point-spread function has no positive mass."""


class SingularSystemError(ArithmeticError):
    """A linear system that must be solved is singular."""


class FlaggedModeError(ArithmeticError):
    """A log-determinant is requested with spectral zeros that make it infinite.

    Attributes
    ----------
    modes : ndarray
        Flat (unsorted) indices of the offending transform-domain modes.
    """

    def __init__(self, message, modes):
        super().__init__(message)
        self.modes = modes


class ParameterError(ValueError):
    """A tuning parameter makes an algorithm ill-defined."""


class UnsupportedPriorError(TypeError):
    """The sampler needs a conjugate Gamma hyperprior."""


class ConvergenceError(RuntimeError):
    """An iterative procedure stopped before meeting its tolerance.

    Attributes
    ----------
    best : object
        Best iterate available when iteration stopped.
    residual : float
        Residual (or step size) associated with ``best``.
    history : list
        Iterates or residuals recorded along the way, when available.
    """

    def __init__(self, message, best=None, residual=float("nan"), history=None):
        super().__init__(message)
        self.best = best
        self.residual = residual
        self.history = history if history is not None else []


class NoCornerError(ValueError):
    """The L-curve has no detectable corner (collinear or too short)."""


class GridTooSmallError(ValueError):
    """Quadrature grid leaves appreciable posterior mass at its boundary."""


class DegenerateSeriesError(ValueError):
    """A series has zero variance, so its autocorrelation is undefined."""
