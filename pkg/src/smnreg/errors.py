"""Exception types raised across the package."""


class SmnregError(Exception):
    """Base class for package errors."""


class DimensionError(SmnregError, ValueError):
    """Array shapes are inconsistent with each other."""


class NotPositiveDefiniteError(SmnregError, ValueError):
    """A matrix that must be symmetric positive definite is not."""


class DivergentIntegralError(SmnregError, ArithmeticError):
    """A moment integral of the mixing density is infinite or could not be resolved."""


class UnsupportedSamplingError(SmnregError):
    """The requested draw cannot be produced for this mixing density."""


class DegenerateStatsError(SmnregError, ArithmeticError):
    """Weighted regression statistics are numerically singular."""


class ProprietyError(SmnregError):
    """The necessary conditions for a proper posterior do not hold."""
