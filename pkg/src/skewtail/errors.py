"""Exception hierarchy shared by every module."""


class SkewTailError(Exception):
    """Base class for all library errors."""


class NotSymmetric(SkewTailError, ValueError):
    pass


class NotPositiveDefinite(SkewTailError, ValueError):
    pass


class DiagNotUnit(SkewTailError, ValueError):
    pass


class DimensionMismatch(SkewTailError, ValueError):
    pass


class SkewnessTooLarge(SkewTailError, ValueError):
    """delta Sigma^-1 delta^T >= 1, so the extended dispersion is not PD."""


class IncompatibleSkewness(SkewnessTooLarge):
    pass


class QuadratureFailure(SkewTailError, ArithmeticError):
    pass


class ClassMismatch(SkewTailError, ValueError):
    """Declared tail class disagrees with the numerically measured one."""


class WrongRegime(SkewTailError, ValueError):
    pass


class SigmaNotNormalized(SkewTailError, ValueError):
    pass


class MixedSignSkewness(SkewTailError, ValueError):
    pass


class DomainError(SkewTailError, ValueError):
    pass


class UnsupportedGenerator(SkewTailError, TypeError):
    pass


class TooFewSamples(SkewTailError, ValueError):
    pass


class QuantileFailure(SkewTailError, ArithmeticError):
    pass


class ConfigError(SkewTailError, ValueError):
    pass
