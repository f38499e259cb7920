"""Exception hierarchy for koblab."""


class KoblabError(Exception):
    """Base class for every error raised by the library."""


class SpecError(KoblabError, ValueError):
    """A manifold spec or experiment config could not be parsed."""


class NumericalError(KoblabError, ArithmeticError):
    """A numerical procedure failed."""


class SingularMetric(NumericalError):
    pass


class OutOfChart(KoblabError, ValueError):
    pass


class DegeneratePlane(KoblabError, ValueError):
    pass


class LeftChart(NumericalError):
    pass


class ReducedStepExhausted(NumericalError):
    pass


class NotImmersion(NumericalError):
    pass


class NonpositiveScale(KoblabError, ValueError):
    pass


class NoConvergence(NumericalError):
    pass


class JetDrift(NumericalError):
    pass


class OutsideDisc(KoblabError, ValueError):
    pass


class NoAdmissibleDisc(NumericalError):
    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class PinchNotCertified(KoblabError):
    pass


class Disconnected(NumericalError):
    pass


class NoScaleFound(NumericalError):
    pass


class ClaimFailure(NumericalError):
    pass


class CertificateFailure(KoblabError):
    def __init__(self, message, offending=()):
        super().__init__(message)
        self.offending = list(offending)


class WitnessInvalid(KoblabError):
    pass


class ExtractionFailed(NumericalError):
    pass


class ABudgetExceeded(NumericalError):
    pass


class ChartTooSmall(KoblabError, ValueError):
    pass


class PreconditionFailed(KoblabError, ValueError):
    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node
