"""Exception hierarchy."""


class CBDMError(Exception):
    """Base class for all solver errors."""


class GeometryError(CBDMError, ValueError):
    pass


class InconsistencyError(GeometryError):
    pass


class ParameterProblemError(CBDMError):
    """The Schwarz-Christoffel parameter problem did not converge."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class InversionError(CBDMError):
    def __init__(self, message, z=None):
        super().__init__(message)
        self.z = z


class DomainError(CBDMError, ValueError):
    """Argument outside the domain of an operation."""


class SingularGradientError(DomainError):
    pass


class DiscretizationError(CBDMError):
    pass


class NonConvergenceError(CBDMError):
    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])


class NumericalFailureError(CBDMError):
    pass
