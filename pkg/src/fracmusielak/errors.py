"""Exception and warning types raised across the package."""


class FracMusielakError(Exception):
    """Base class for all package errors."""


class DomainError(FracMusielakError, ValueError):
    """An argument lies outside the domain of an operation."""


class QuadratureError(FracMusielakError, ArithmeticError):
    """A quadrature failed to reach its tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class CertificationError(FracMusielakError):
    """A sampled structural hypothesis (growth indices, ...) is violated."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class SetupError(FracMusielakError, ValueError):
    """Problem data is inconsistent or violates a required hypothesis."""


class ConsistencyError(FracMusielakError):
    """An internal identity that must hold by construction was violated."""


class RegimeError(FracMusielakError):
    """The solver was applied outside the variational regime it requires."""


class ConvergenceError(FracMusielakError):
    """An iterative solver stopped without meeting its tolerance."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class ConfigError(FracMusielakError, ValueError):
    """A run configuration failed to parse or validate."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class AccuracyWarning(UserWarning):
    """A computed value carries a larger error bound than requested."""
