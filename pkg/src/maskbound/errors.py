"""Exception hierarchy shared by every module."""


class MaskingError(ValueError):
    """Base class for all precondition failures raised by this package."""


class InvalidDistribution(MaskingError):
    pass


class DimensionMismatch(MaskingError):
    pass


class AbsoluteContinuityViolation(MaskingError):
    pass


class NonPositiveGamma(MaskingError):
    pass


class PhiOutOfRange(MaskingError):
    pass


class DomainError(MaskingError):
    pass


class NoOffSymbol(MaskingError):
    pass


class OffSymbolMassNonzero(MaskingError):
    pass


class NonBinaryInput(MaskingError):
    pass


class DegenerateMoments(MaskingError):
    pass


class MuOutOfRange(MaskingError):
    pass


class BudgetExceeded(MaskingError):
    pass


class InsufficientTrials(MaskingError):
    pass


class QuadratureNonConvergence(MaskingError):
    pass


class InvalidSweepSpec(MaskingError):
    pass
