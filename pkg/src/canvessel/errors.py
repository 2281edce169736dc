"""Exception hierarchy shared by all modules."""


class VesselError(Exception):
    """Base class for every error raised by canvessel."""


class DimensionError(VesselError, ValueError):
    pass


class SingularityError(VesselError, ArithmeticError):
    """A matrix (usually X) is singular or too close to singular to invert."""

    def __init__(self, message, det=None):
        super().__init__(message)
        self.det = det


class ResonanceError(VesselError, ArithmeticError):
    """Some lambda_i + mu_j vanishes in a diagonal Sylvester solve."""

    def __init__(self, message, pairs=()):
        super().__init__(message)
        self.pairs = list(pairs)


class SpectrumError(VesselError, ValueError):
    """The spectral parameter sits on (or too near) the spectrum of a generator."""

    def __init__(self, message, distance=None):
        super().__init__(message)
        self.distance = distance


class ParameterError(VesselError, ValueError):
    pass


class DomainError(VesselError, ValueError):
    pass


class MultiplicityError(VesselError, ValueError):
    """Generator data that is not diagonalizable."""


class StencilError(VesselError, ValueError):
    pass


class DegenerateInputError(VesselError, ValueError):
    """Every grid point was masked; there is nothing left to check."""


class OrderCapError(VesselError, ValueError):
    pass


class ConsistencyError(VesselError, ValueError):
    def __init__(self, message, relation=None):
        super().__init__(message)
        self.relation = relation


class ConditioningError(VesselError, ArithmeticError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
