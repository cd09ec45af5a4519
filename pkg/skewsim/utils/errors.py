"""Exception hierarchy for skewsim"""


class SkewSimError(Exception):
    """Base class for every error raised by the package."""


class DomainError(SkewSimError, ValueError):
    """Argument outside the domain of an evaluator (t <= 0, NaN, bad index)."""


class DivergentBoundError(DomainError):
    """|beta1 * beta2| = 1: the series and its envelope bound diverge."""


class UnsupportedRegimeError(DomainError):
    """Drift and skewness signs outside the range covered by the series."""


class ConfigurationError(SkewSimError, ValueError):
    """Malformed configuration, or a walk lattice that misses a barrier."""


class QuadratureError(SkewSimError, ArithmeticError):
    """Node doubling did not reach the requested tolerance."""

    def __init__(self, message: str, achieved: float = float('nan')):
        super().__init__(message)
        self.achieved = achieved
