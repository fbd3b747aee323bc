"""
Exception hierarchy for nearbest.

Everything derives from ValueError so callers that only know the
``except ValueError`` convention keep working.
"""


class NearBestError(ValueError):
    """Base class of every error raised by the package."""


class ArcGeometryError(NearBestError):
    """Pieces do not close up, the arc self-intersects, or has zero length."""


class ParameterRangeError(NearBestError):
    """An arc parameter, side label or radius lies outside its valid range."""


class JumpOrderError(NearBestError):
    """The branches agree to every tested order, or disagree at order zero."""


class AdmissibilityError(NearBestError):
    """A lemniscate or Γ-ray violates the admissibility conditions."""


class MapAccuracyError(NearBestError):
    """The exterior map could not reach the requested accuracy."""

    def __init__(self, message: str, achieved: float = float("nan")):
        super().__init__(message)
        self.achieved = achieved


class KernelDomainError(NearBestError):
    """A kernel pole lies on or inside the arc's level curve."""


class DegreeBudgetError(NearBestError):
    """The degree arithmetic of a construction exceeds the target degree."""


class ConvergenceError(NearBestError):
    """An iterative solver produced no usable iterate."""


class QuadratureError(NearBestError):
    """A contour rule cannot be built for the requested split."""


class ClassificationError(NearBestError):
    """Sample points violate the wedge classification of the straightening."""


class RateFitError(NearBestError):
    """Too few usable rows for a decay-rate fit."""


class SplitConsistencyError(NearBestError):
    """The Cauchy split does not reproduce the function."""


class ConfigError(NearBestError):
    """A scenario configuration could not be loaded or validated."""
