"""Exception and warning types raised across the package."""


class DebiasError(Exception):
    """Base class for all errors raised by this package."""


# schedule
class NonIntegralLevels(DebiasError, ValueError):
    pass


class InvalidRatio(DebiasError, ValueError):
    pass


class NonPositiveAlpha(DebiasError, ValueError):
    pass


class LengthMismatch(DebiasError, ValueError):
    pass


class NoFiniteMinimum(DebiasError, ValueError):
    pass


class DegenerateInput(DebiasError, ValueError):
    pass


# estimator
class PathLongerThanSupport(DebiasError, ValueError):
    pass


class ProviderFailure(DebiasError, RuntimeError):
    """A provider raised while evaluating a level; ``level`` is 1-based."""

    def __init__(self, level, cause):
        super().__init__(f"provider failed at level {level}: {cause!r}")
        self.level = level
        self.cause = cause


class ToleranceUnreachable(DebiasError, RuntimeError):
    """The replicate cap was hit before the standard error target.

    The partial estimate is attached as ``estimate``.
    """

    def __init__(self, estimate, tolerance):
        super().__init__(
            f"stderr {estimate.stderr:.4g} > tolerance {tolerance:.4g} "
            f"after R={estimate.R} replicates"
        )
        self.estimate = estimate
        self.tolerance = tolerance


class MemoryCapExceeded(DebiasError, RuntimeError):
    def __init__(self, level, size, cap):
        super().__init__(f"level {level} needs {size} observations, cap is {cap}")
        self.level = level
        self.size = size
        self.cap = cap


# sampler
class NonFiniteTarget(DebiasError, ValueError):
    pass


class DivergentChain(DebiasError, RuntimeError):
    pass


# models
class SingularCovariance(DebiasError, ValueError):
    pass


class SubsetTooSmall(DebiasError, ValueError):
    pass


class DimensionMismatch(DebiasError, ValueError):
    pass


class FactorizationFailure(DebiasError, RuntimeError):
    pass


class InvalidParams(DebiasError, ValueError):
    pass


# streaming
class StreamExhausted(DebiasError, RuntimeError):
    pass


class AlphaAboveOneWarning(UserWarning):
    """Truncation decay above 1: the sub-linear cost analysis assumes alpha < 1."""


class AlphaExceedsBeta(UserWarning):
    """alpha >= beta: the second-moment bound diverges as the number of levels grows."""


class LowIdentifiabilityWarning(UserWarning):
    """A partial posterior is (nearly) improper or prior-dominated on its subset."""
