"""Exception types raised across the package."""


class SocsenseError(Exception):
    """Base class for all package errors."""


class AllZero(SocsenseError, ValueError):
    """Normalization of a vector with no positive mass (impossible observation/action)."""


class DimensionMismatch(SocsenseError, ValueError):
    pass


class BadAlpha(SocsenseError, ValueError):
    """CVaR level outside (0, 1]."""


class ImpossibleAction(SocsenseError, ValueError):
    """Public-belief update requested for an action of zero probability."""


class UnsupportedDimension(SocsenseError, ValueError):
    pass


class NumericFailure(SocsenseError, RuntimeError):
    """Base for failures of iterative numerical procedures."""


class NoConvergence(NumericFailure):
    pass


class DegenerateWeights(NumericFailure):
    """Particle weights collapsed onto a single particle."""


class NoEdges(SocsenseError, ValueError):
    pass


class Disconnected(SocsenseError, ValueError):
    pass


class ZeroDenominator(SocsenseError, ZeroDivisionError):
    pass


class EmptyTail(SocsenseError, ValueError):
    pass


class ConfigError(SocsenseError, ValueError):
    pass


class SingularInformation(RuntimeWarning):
    """Issued when an information matrix needed ridge regularization."""
