"""Numerical verification of the quantized KZB heat equation.

Modules
-------
numerics     quadrature, finite differences, branch conventions
theta        odd Jacobi theta function, rho = theta'/theta, level-k thetas
gamma        elliptic gamma function, Omega kernel ratio, its two functional equations
flat         Gaussian operators, SL(3, Z) flat connection, m = 0 translation operator
interacting  m = 1 elliptic kernel and translation operator
spectral     KZB-heat residuals, Lame eigenfunctions, hypergeometric solution
cli          command-line front end
"""
from .errors import (BranchError, DecayViolation, DegenerateBasePoint, DomainError, FitUnstable,
                     FresnelDivergence, MatrixMismatch, NonConvergence, NumericalError, PoleError,
                     QKZBError, ZeroQuad)
from .numerics import DEFAULT_TOL, LineContour, QuadratureResult, Tolerance

__all__ = [
    "BranchError", "DecayViolation", "DegenerateBasePoint", "DomainError", "FitUnstable",
    "FresnelDivergence", "MatrixMismatch", "NonConvergence", "NumericalError", "PoleError",
    "QKZBError", "ZeroQuad", "DEFAULT_TOL", "LineContour", "QuadratureResult", "Tolerance",
]
__version__ = "0.1.0"
