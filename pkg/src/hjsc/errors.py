"""Exception types shared across the package."""


class HJSCError(Exception):
    """Base class for all package errors."""


class ParameterRangeError(HJSCError, ValueError):
    """A numeric parameter lies outside its admissible range."""


class DomainError(HJSCError, ValueError):
    """A point lies outside the closed domain, or the domain is degenerate."""


class GradientMismatchError(HJSCError, ValueError):
    """A running cost's gradient disagrees with finite differences of its values."""


class NonConvergenceError(HJSCError, RuntimeError):
    """Value iteration hit its iteration cap before reaching the tolerance."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class StencilError(HJSCError, ValueError):
    """A finite-difference stencil needs values that are not available."""


class BranchInvalidError(HJSCError, RuntimeError):
    """A characteristic branch pushed u above f; the sign choice is wrong."""


class SingularCurvatureError(HJSCError, ZeroDivisionError):
    """Curvature formula evaluated where u' vanishes."""


class RunawayError(HJSCError, RuntimeError):
    """A shooting trajectory left the bounding box."""

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time
