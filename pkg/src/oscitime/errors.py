"""Exception and warning classes used across :mod:`oscitime`."""

__all__ = [
    "OscitimeError",
    "DomainError",
    "IndexOutOfTruncationError",
    "DimensionMismatchError",
    "DivergentFamilyError",
    "UnsatisfiableConstraintError",
    "SupportOverflowError",
    "ContourError",
    "BranchError",
    "PairingError",
    "PreconditionError",
    "HypothesisError",
    "DegenerateEquationError",
    "ConvergenceError",
    "ConfigError",
    "AccuracyWarning",
    "GrowthConditionWarning",
    "PrecisionWarning",
    "NormalizationWarning",
]


class OscitimeError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(OscitimeError, ValueError):
    """A parameter lies outside the set where the object is defined."""


class IndexOutOfTruncationError(OscitimeError, IndexError):
    """A basis index does not fit into the truncation."""


class DimensionMismatchError(OscitimeError, ValueError):
    """Operands live on truncations of different size."""


class DivergentFamilyError(DomainError):
    """A vector family has coefficients that do not decay."""


class UnsatisfiableConstraintError(DomainError):
    """A domain constraint has no nonzero solution in the truncation."""


class SupportOverflowError(OscitimeError):
    """Vector support plus operator bandwidth reaches the truncation edge."""


class ContourError(OscitimeError, ValueError):
    """No admissible integration contour exists."""


class BranchError(OscitimeError, ValueError):
    """The integrand of a contour logarithm vanishes or winds around zero."""


class PairingError(OscitimeError, ValueError):
    """An (f, g) pairing violates the telescoping identity.

    Attributes
    ----------
    index : int
        First even index where the identity fails.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class PreconditionError(OscitimeError, ValueError):
    """A documented precondition of an operation does not hold."""


class HypothesisError(PreconditionError):
    """A theorem hypothesis (for instance roots on the unit circle) fails."""


class DegenerateEquationError(OscitimeError, ValueError):
    """The defining equation degenerates for the given parameters."""


class ConvergenceError(OscitimeError, RuntimeError):
    """An iteration hit its cap.

    Attributes
    ----------
    diagnostics : dict
        Iteration count, last change and any other useful state.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class ConfigError(OscitimeError, ValueError):
    """Invalid experiment configuration."""


class AccuracyWarning(UserWarning):
    """A numerical result may not reach the requested accuracy."""


class GrowthConditionWarning(UserWarning):
    """A weight sequence fails the polynomial growth condition."""


class PrecisionWarning(UserWarning):
    """A callable returned a double where extended precision was requested."""


class NormalizationWarning(UserWarning):
    """An input vector was not normalized and has been rescaled."""
