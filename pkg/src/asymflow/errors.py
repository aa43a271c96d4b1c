"""Exception hierarchy shared by all modules."""


class AsymflowError(Exception):
    """Base class for every error raised by the package."""


class InputError(AsymflowError, ValueError):
    """Malformed arguments: wrong dimension, negative weights, bad config."""


class DomainError(AsymflowError, ValueError):
    """A point lies outside the domain of a metric model."""


class ModelError(AsymflowError):
    """The requested operation is not supported by the model (e.g. no tangent structure)."""


class NumericalError(AsymflowError, ArithmeticError):
    """An iterative routine failed to converge.

    ``residual`` carries the last residual; ``best`` carries the best available
    value (an upper bound for distances) when one exists.
    """

    def __init__(self, message, residual=None, best=None):
        super().__init__(message)
        self.residual = residual
        self.best = best


class SizeError(InputError):
    """Problem size exceeds a hard cap."""
