"""Error types shared by all modules.

The CLI maps :class:`ConfigError` to exit code 2 and every
:class:`NumericGuardError` to exit code 3.
"""


class GaborWFError(Exception):
    """Base class for library errors."""


class ConfigError(GaborWFError, ValueError):
    """Invalid or missing configuration field.

    Parameters
    ----------
    message : str
        Human readable description.
    field : str, optional
        Dotted name of the offending field.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class DomainError(GaborWFError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class NotSampleableError(GaborWFError, ValueError):
    """A distribution without pointwise values was sent to a sampling path."""


class NumericGuardError(GaborWFError, ArithmeticError):
    """A numerical safety check refused to produce a result."""


class AliasingError(NumericGuardError):
    """Sampled content would exceed the Nyquist limit of the grid."""


class RangeError(NumericGuardError):
    """A tabulated quantity was queried outside its usable range.

    Attributes
    ----------
    max_usable : float
        Largest argument for which the computation is reliable.
    """

    def __init__(self, message, max_usable):
        super().__init__(message)
        self.max_usable = float(max_usable)


class ConditioningError(NumericGuardError):
    """A quantity that must be inverted is numerically zero."""


class ConvergenceError(NumericGuardError):
    """An iterative method did not reach its tolerance.

    Attributes
    ----------
    history : list of float
        Residual after each iteration.
    """

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


class GrowthError(NumericGuardError):
    """A symbol grows faster than the declared exponential bound.

    Attributes
    ----------
    fitted_tau : float
        Smallest growth exponent consistent with the samples.
    """

    def __init__(self, message, fitted_tau):
        super().__init__(message)
        self.fitted_tau = float(fitted_tau)


class CostError(NumericGuardError):
    """The requested computation exceeds a hard size guard."""
