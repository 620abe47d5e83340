"""Exception hierarchy shared by all modules."""


class S3MinimalError(Exception):
    """Base class for every error raised by the package."""


class InvalidPoint(S3MinimalError, ValueError):
    pass


class NotFiberPreserving(S3MinimalError, ValueError):
    """An isometry that is neither unitary nor antiunitary."""


class NonOrthogonalGenerator(S3MinimalError, ValueError):
    pass


class ClosureCapExceeded(S3MinimalError, RuntimeError):
    def __init__(self, cap, reached):
        super().__init__(f"group closure exceeded cap={cap} (reached {reached} elements)")
        self.cap = cap
        self.reached = reached


class InvalidN(S3MinimalError, ValueError):
    pass


class NotAPrismEdge(S3MinimalError, KeyError):
    pass


class UnknownFaceTag(S3MinimalError, KeyError):
    pass


class HypothesisViolated(S3MinimalError, ValueError):
    pass


class NonConvergence(S3MinimalError, RuntimeError):
    def __init__(self, iterations, residual):
        super().__init__(f"solver did not converge: {iterations} iterations, residual {residual:.3e}")
        self.iterations = iterations
        self.residual = residual


class BoundaryAssemblyFailure(S3MinimalError, RuntimeError):
    pass


class WeldFailure(S3MinimalError, RuntimeError):
    pass


class NotClosed(S3MinimalError, ValueError):
    pass


class PoleOnSurface(S3MinimalError, ValueError):
    pass


class ConfigParseError(S3MinimalError, ValueError):
    pass
