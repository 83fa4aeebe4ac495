"""Exception types shared across the package."""


class QsteerError(Exception):
    """Base class for all package-specific errors."""


class InvalidStateError(QsteerError):
    """A density matrix violates trace, Hermiticity or positivity tolerances."""


class QuadratureFailureError(QsteerError):
    """The adaptive quadrature could not reach the requested tolerance."""


class DegenerateTargetError(QsteerError):
    """Feedback target at an equal-superposition point (theta = +/- pi/2)."""


class StepInstabilityError(QsteerError):
    """Deterministic integrator violated trace/positivity bounds at every retry."""


class ConfigError(QsteerError):
    """Configuration document is malformed or violates an invariant."""
