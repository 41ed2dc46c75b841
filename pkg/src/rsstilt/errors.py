"""Exception hierarchy.

Every error raised on purpose by the library derives from ``RssTiltError``
so callers (the Monte Carlo harness, the CLI) can catch one class. The CLI
reports ``type(err).__name__`` so names here are part of the interface.
"""


class RssTiltError(ValueError):
    """Base class for library errors."""


class TargetOutOfRange(RssTiltError):
    """Tilting target is not strictly inside the range of the values."""


class DegenerateValues(RssTiltError):
    """All constrained values are equal, so no tilt can move the mean."""


class NoConvergence(RssTiltError):
    """Iterative solver hit its iteration cap."""


class RowTooSmall(RssTiltError):
    """A rank row has fewer observations than the operation needs."""


class ZeroVariance(RssTiltError):
    """A test statistic's standard error is zero."""


class WeightMismatch(RssTiltError):
    """Weight vector does not match the sample it is applied to."""


class NonPositiveMean(RssTiltError):
    """Exponential fit requested for a sample with mean <= 0."""


class UnbalancedDesign(RssTiltError):
    """Operation requires a balanced design."""


class NegativeSigma(RssTiltError):
    """Ranking-error standard deviation is negative."""


class DimensionMismatch(RssTiltError):
    """Matrix or vector shape disagrees with the design."""


class PopulationTooSmall(RssTiltError):
    """Finite population has fewer records than the set size."""


class InvalidDesign(RssTiltError):
    """Design counts violate k >= 2 or m_r >= 1, or rows disagree with it."""
