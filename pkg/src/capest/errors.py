"""Exception types shared across the package.

Contract violations (bad dimensions, off-simplex vectors, parameters outside
their box) raise plain ``ValueError``; the classes below mark conditions a
caller may want to handle specially.
"""


class NotDifferentiableError(TypeError):
    """Raised when parameter derivatives are requested from a channel family
    that has none (e.g. a fixed-table family)."""


class SingularSystemError(ArithmeticError):
    """Raised when the fixed-point sensitivity system is singular or nearly so.

    Carries the condition estimate of the offending matrix so callers can
    report how close to singular the solve was.
    """

    def __init__(self, message: str, condition_estimate: float = float("inf")):
        super().__init__(message)
        self.condition_estimate = condition_estimate


class ImpossibleDataError(ValueError):
    """Raised when observed output symbols have zero probability under the
    model, so the likelihood is -inf and gradients are undefined."""


class NumericError(ArithmeticError):
    """Raised on non-finite intermediates inside iterative solvers.

    ``iteration`` records where the breakdown happened.
    """

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration
