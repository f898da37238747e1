"""Exception hierarchy."""


class SaddleBoundsError(Exception):
    """Base class for all errors raised by this package."""


class NotPositiveDefinite(SaddleBoundsError, ValueError):
    def __init__(self, message: str, level: int | None = None):
        super().__init__(message)
        self.level = level


class DimensionCap(SaddleBoundsError, ValueError):
    pass


class NoConvergence(SaddleBoundsError, RuntimeError):
    """Lanczos exhausted its Krylov budget; ``estimate`` holds the best values
    and ``residual`` their residual norms when known."""

    def __init__(self, message: str, estimate=None, residual=None):
        super().__init__(message)
        self.estimate = estimate
        self.residual = residual


class ShapeMismatch(SaddleBoundsError, ValueError):
    pass


class AssumptionViolated(SaddleBoundsError, ValueError):
    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class DegenerateGamma(SaddleBoundsError, ValueError):
    pass


class DegenerateCubic(SaddleBoundsError, ValueError):
    """The cubic lost its coupling term; ``roots`` holds the limiting roots."""

    def __init__(self, message: str, roots=None):
        super().__init__(message)
        self.roots = roots


class WrongBlockCount(SaddleBoundsError, ValueError):
    pass
