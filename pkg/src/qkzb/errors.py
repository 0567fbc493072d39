"""Exception hierarchy shared by every module.

The CLI maps :class:`NumericalError` subclasses to exit code 3.
"""


class QKZBError(Exception):
    """Base class for all package errors."""


class NumericalError(QKZBError):
    """A computation could not deliver a trustworthy value."""


class NonConvergence(NumericalError):
    pass


class DomainError(NumericalError, ValueError):
    pass


class DecayViolation(NumericalError):
    """Integrand is not small enough at the truncation radius of a line contour."""


class PoleError(NumericalError):
    pass


class BranchError(NumericalError):
    pass


class FresnelDivergence(NumericalError):
    """A Gaussian contour integral diverges (the quadratic form does not decay)."""


class ZeroQuad(FresnelDivergence):
    pass


class DegenerateBasePoint(NumericalError):
    pass


class MatrixMismatch(QKZBError, ValueError):
    pass


class FitUnstable(NumericalError):
    pass
