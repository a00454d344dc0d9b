"""Exception hierarchy shared across the package."""


class RefPriorError(Exception):
    """Base class for every error raised by refprior."""


class DomainError(RefPriorError, ValueError):
    """An argument lies outside the domain of a function or model."""


class RangeError(RefPriorError, ValueError):
    """Evaluation requested outside a tabulated range (no extrapolation)."""


class UnsupportedOperationError(RefPriorError, NotImplementedError):
    """The model does not provide what the operation needs."""


class QuadratureError(RefPriorError, ArithmeticError):
    """Adaptive quadrature failed to meet its tolerance.

    Attributes
    ----------
    estimate : float
        Best estimate reached before giving up (log scale for log integrals).
    gap : float
        Estimated error of ``estimate`` relative to the tolerance target.
    """

    def __init__(self, message, estimate=float("nan"), gap=float("inf")):
        super().__init__(message)
        self.estimate = estimate
        self.gap = gap


class ImproperPosteriorError(RefPriorError, ArithmeticError):
    """The integrated likelihood under the prior is infinite."""


class NonRegularModelError(RefPriorError, ArithmeticError):
    """Fisher information is undefined, divergent or negative."""


class ConfigError(RefPriorError, ValueError):
    """A run configuration failed validation."""


class InvariantViolation(RefPriorError, AssertionError):
    """An internal invariant that should be impossible to break was broken."""
