"""Exception hierarchy shared by the solver layers and the CLI."""


class FluorcorrError(Exception):
    """Base class for every error raised by this package."""


class InvalidParams(FluorcorrError, ValueError):
    """A parameter set violates its domain constraints."""


class NonConvergence(FluorcorrError):
    """The eigenvalue reduction did not converge."""


class DefectiveMatrix(FluorcorrError):
    """Eigenvectors are too ill-conditioned to biorthonormalize."""


class KernelDimensionError(FluorcorrError):
    """The matrix does not have a one-dimensional kernel."""


class SingularShift(FluorcorrError):
    """A shifted linear system is numerically singular."""


class NegativeDelay(FluorcorrError, ValueError):
    """A negative delay was passed to a forward propagator."""


class ZeroIntensity(FluorcorrError):
    """The detected intensity vanishes, so g2 cannot be normalized."""


class EpsilonNotConverged(FluorcorrError):
    """Richardson extrapolation in the sensor coupling did not converge."""


class UndefinedAtZero(FluorcorrError, ValueError):
    """The ideal cascade correlation is discontinuous at zero delay."""


class FitDivergence(FluorcorrError):
    """A cascade fit left a residual above the accepted fraction."""


class InsufficientWindow(FluorcorrError, ValueError):
    """Not enough samples on one delay branch to fit."""


class ZeroDriving(FluorcorrError, ValueError):
    """A closed form that diverges at zero driving was asked for it."""


class CouplingTooStrong(UserWarning):
    """Sensor coupling exceeds the weak-coupling bound."""
