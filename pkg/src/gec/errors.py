"""Exception hierarchy for the GEC package."""


class GecError(Exception):
    """Base class for all package errors."""


class ConfigError(GecError, ValueError):
    """Invalid configuration, dimensions or parameters."""


class DomainError(GecError, ValueError):
    """Argument outside the domain of a transform or solver."""


class SolverError(GecError):
    """An inner iterative solve did not converge.

    Carries the last iterate and the residual at which it stopped.
    """

    def __init__(self, message, last_iterate=None, residual=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


class CurvatureError(GecError):
    """Hessian plus precision is not positive definite."""


class QuadratureError(GecError):
    """Adaptive quadrature failed to reach the requested accuracy."""


class AccuracyError(GecError):
    """A grid oracle's error estimate exceeds the requested tolerance."""


class DivergenceError(GecError):
    """The GEC recursion produced non-finite or exploding iterates."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class InvariantViolation(GecError):
    """A structural invariant failed during a run that asserts it."""


class EquivalenceError(GecError):
    """Two trajectories that must coincide diverged."""

    def __init__(self, message, index=None, deviation=None):
        super().__init__(message)
        self.index = index
        self.deviation = deviation
