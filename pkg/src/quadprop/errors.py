"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`QuadpropError`, so callers (and the CLI) can map each family to a
distinct exit status.
"""


class QuadpropError(Exception):
    """Base class for all package errors."""


class DimensionError(QuadpropError, ValueError):
    """A matrix or vector does not match the declared number of degrees of freedom."""


class TimeRangeError(QuadpropError, ValueError):
    """A time-dependent quantity was evaluated outside its sampled range."""


class CausticError(QuadpropError, ArithmeticError):
    """The position block B of the fundamental matrix is singular (focal point).

    Raised instead of returning a number: past a caustic the Gaussian kernel
    needs a Maslov phase correction, which is not implemented.
    """

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class QuadratureError(QuadpropError):
    """A grid or quadrature rule is too coarse for the requested accuracy."""


class TruncationError(QuadpropError):
    """The truncated Fock basis leaks population into its top level."""


class ConfigError(QuadpropError, ValueError):
    """A scenario configuration could not be parsed."""


class ValidationError(QuadpropError, ValueError):
    """A scenario configuration parsed but holds invalid values."""
