"""Exception hierarchy.

Configuration problems and numerical/assumption failures are kept apart so
the CLI can map them to distinct exit codes.
"""


class LcaoBoundError(Exception):
    """Base class for all package errors."""


class ConfigError(LcaoBoundError, ValueError):
    """Invalid parameters, bounds, or configuration file contents."""


class ShapeError(LcaoBoundError, ValueError):
    """Array arguments with incompatible lengths."""


class NumericalError(LcaoBoundError, ArithmeticError):
    """A numerical kernel failed (non-convergence, breakdown)."""


class ConvergenceError(NumericalError):
    """An iterative eigensolver did not converge.

    Attributes
    ----------
    diagnostics : dict
        Iteration counts and residual norms of the failing pairs.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class NotPSDError(NumericalError):
    """A matrix expected to be positive semi-definite has a negative pivot."""


class DegenerateBasisError(NumericalError):
    """The retained basis subspace is empty or too small for the request."""


class AssumptionError(LcaoBoundError):
    """A hypothesis of the error bounds does not hold numerically."""


class NotCoerciveError(AssumptionError):
    """An operator that must be positive definite is not."""


class ShiftTooSmallError(AssumptionError):
    """The shift does not make the guaranteed coercivity constant positive."""


class GapAssumptionError(AssumptionError):
    """The computed eigenvalue is not separated from its neighbours."""
