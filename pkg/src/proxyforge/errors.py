"""Exception types raised across the package."""


class ProxyForgeError(Exception):
    """Base class for all package errors."""


class NormalizationError(ProxyForgeError, ValueError):
    pass


class DegenerateClassError(ProxyForgeError, ValueError):
    pass


class EmptyDenominatorError(ProxyForgeError, ValueError):
    """A softmax-style denominator would sum over an empty set."""


class NoTripletError(ProxyForgeError, ValueError):
    pass


class SamplerError(ProxyForgeError, ValueError):
    pass


class TrainingDivergedError(ProxyForgeError, RuntimeError):
    def __init__(self, epoch: int, message: str = ""):
        self.epoch = epoch
        super().__init__(message or f"training diverged at epoch {epoch}")


class EvaluationError(ProxyForgeError, ValueError):
    pass


class TrialTooShortError(EvaluationError):
    pass


class ProbeError(ProxyForgeError, ValueError):
    pass
