"""Exception hierarchy shared by the simulation modules."""


class GhostBohmError(Exception):
    """Base class for all errors raised by this package."""


class ModelError(GhostBohmError, ValueError):
    """Invalid model parameters (non-finite, singular kinetic tensor, ...)."""


class DegeneracyError(ModelError):
    """The bi-Hamiltonian pair is undefined because nu**2 == Omega."""


class StepSizeError(GhostBohmError, ValueError):
    pass


class BlowUpError(GhostBohmError, ArithmeticError):
    """A state component crossed the overflow guard."""


class SingularityError(GhostBohmError, ArithmeticError):
    """The linearised Riccati flow hit a caustic (det X ~ 0)."""


class NonNormalisableError(GhostBohmError, ValueError):
    """Density sampling requested for a packet whose A is not positive definite."""


class GridMismatchError(GhostBohmError, ValueError):
    pass


class AmplitudeUnderflowError(GhostBohmError, ArithmeticError):
    pass


class InconclusiveRegimeError(GhostBohmError):
    def __init__(self, message, evidence=None):
        super().__init__(message)
        self.evidence = dict(evidence or {})


class ConfigError(GhostBohmError, ValueError):
    """Scenario parse or validation failure.

    ``problems`` lists every violated field as ``(location, message)``.
    """

    def __init__(self, message, problems=()):
        super().__init__(message)
        self.problems = list(problems)
