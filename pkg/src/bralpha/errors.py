"""Exception hierarchy shared by all modules."""


class BRAlphaError(Exception):
    """Base class for errors raised by bralpha."""


class DomainError(BRAlphaError, ValueError):
    """Argument outside the domain of a function (e.g. K0 at x <= 0)."""


class SingularityError(BRAlphaError, ArithmeticError):
    """Evaluation at a kernel singularity."""


class DegenerateCurveError(BRAlphaError):
    """Sheet is not chord-arc or has locally collapsed."""


class ResolutionError(BRAlphaError, ValueError):
    """Too few markers for the requested stencil."""


class TopologyMismatchError(BRAlphaError, ValueError):
    """Kernel periodicity inconsistent with the curve topology."""


class QuadratureError(BRAlphaError, RuntimeError):
    """Adaptive quadrature failed to converge."""


class RegimeError(BRAlphaError):
    """Mode amplitude left the linear regime inside a fit window."""


class WindowError(BRAlphaError, ValueError):
    """Fit window invalid or too sparsely sampled."""


class InsufficientDataError(BRAlphaError, ValueError):
    """Not enough distinct data for a convergence fit."""


class ConfigError(BRAlphaError, ValueError):
    """Invalid run configuration."""


class ExcursionError(DegenerateCurveError):
    """Periodic strip wandered too far for nearest-image chord distances."""
