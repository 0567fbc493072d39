"""Elliptic gamma function and the kernel ratio Omega.

    Gamma(t, tau, p) = prod_{j,k>=0} (1 - e(-t + (j+1) tau + (k+1) p)) / (1 - e(t + j tau + k p)),

with e(x) = exp(2 pi i x).  Products are accumulated as sums of principal
logarithms and exponentiated once, which is exact regardless of branches.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import DomainError, NonConvergence, PoleError
from .numerics import SERIES_TOL, Tolerance
from .theta import as_modulus

POLE_RADIUS = 1e-12


def _cutoffs(im_shift: float, tau: complex, p: complex, tol: Tolerance):
    """Truncation (J, K) such that the discarded log-factors sum below tolerance.

    Factors beyond the cutoff satisfy |log(1 - x)| <= 2|x| once |x| <= 1/2, with
    |x| <= exp(2 pi im_shift) |q|^j |r|^k.
    """
    lq = -2 * math.pi * tau.imag
    lr = -2 * math.pi * p.imag
    q, r = math.exp(lq), math.exp(lr)
    if q >= 1 or r >= 1:
        raise DomainError("moduli must lie in the upper half plane")
    scale = math.exp(2 * math.pi * im_shift)
    target = tol.abs_tol + tol.rel_tol
    # total tail <= 2 scale (q^J/(1-q)/(1-r) + r^K/(1-q)/(1-r))
    budget = target * (1 - q) * (1 - r) / (4 * scale)
    J = max(1, int(math.ceil(math.log(budget) / lq)) + 1)
    K = max(1, int(math.ceil(math.log(budget) / lr)) + 1)
    if J * K > tol.max_evals:
        raise NonConvergence(f"elliptic gamma product needs a {J}x{K} truncation")
    return J, K


def _log_factor_sum(z, tau, p, J, K):
    """sum_{j<J, k<K} log(1 - e(z + j tau + k p)), broadcast over z."""
    j = np.arange(J)[:, None]
    k = np.arange(K)[None, :]
    lattice = np.exp(2j * math.pi * (j * tau + k * p))
    x = np.exp(2j * math.pi * z)[..., None, None] * lattice
    one_minus = 1 - x
    if np.any(np.abs(one_minus) < POLE_RADIUS):
        raise PoleError("a factor of the elliptic gamma product vanishes")
    return np.log(one_minus).sum(axis=(-2, -1))


def log_ellgamma(t, tau, p, tol: Tolerance = SERIES_TOL):
    tau, p = as_modulus(tau), as_modulus(p)
    t = np.asarray(t, dtype=complex)
    im = float(np.max(np.abs(t.imag))) if t.size else 0.0
    J, K = _cutoffs(im + 0.0, tau, p, tol)
    num = _log_factor_sum(-t + tau + p, tau, p, J, K)
    den = _log_factor_sum(t, tau, p, J, K)
    return num - den


def ellgamma(t, tau, p, tol: Tolerance = SERIES_TOL):
    """Elliptic gamma function Gamma(t, tau, p); ``t`` may be an array."""
    out = np.exp(log_ellgamma(t, tau, p, tol))
    return complex(out) if np.ndim(out) == 0 else out


def omega_product(a, t, tau, p, tol: Tolerance = SERIES_TOL):
    """Omega_a(t, tau, p) from its own four-factor double product."""
    tau, p = as_modulus(tau), as_modulus(p)
    t = np.asarray(t, dtype=complex)
    a = complex(a)
    im = float(np.max(np.abs(t.imag))) + abs(a.imag) if t.size else abs(a.imag)
    J, K = _cutoffs(im, tau, p, tol)
    log_val = (_log_factor_sum(t - a, tau, p, J, K)
               + _log_factor_sum(-t - a + tau + p, tau, p, J, K)
               - _log_factor_sum(t + a, tau, p, J, K)
               - _log_factor_sum(-t + a + tau + p, tau, p, J, K))
    out = np.exp(log_val)
    return complex(out) if np.ndim(out) == 0 else out


def omega(a, t, tau, p, tol: Tolerance = SERIES_TOL, check: bool = False):
    """Omega_a(t, tau, p) = Gamma(t+a, tau, p) / Gamma(t-a, tau, p).

    With ``check`` the direct product form is evaluated as well and a
    disagreement beyond 1e-9 (relative) raises ``NonConvergence``.
    """
    t = np.asarray(t, dtype=complex)
    a = complex(a)
    out = np.exp(log_ellgamma(t + a, tau, p, tol) - log_ellgamma(t - a, tau, p, tol))
    if check:
        other = omega_product(a, t, tau, p, tol)
        dev = np.max(np.abs(out - other) / (np.abs(out) + np.abs(other)))
        if dev > 1e-9:
            raise NonConvergence(f"Omega ratio and product forms disagree ({dev:.3g})")
    return complex(out) if np.ndim(out) == 0 else out


def q_cubic(t, tau, p):
    """The cubic Q(t; tau, p) in the modular equation of the elliptic gamma function."""
    tau, p, t = complex(tau), complex(p), np.asarray(t, dtype=complex)
    if tau * p == 0:
        raise DomainError("Q is undefined for tau * p = 0")
    tp = tau * p
    s = tau + p - 1
    out = (t**3 / (3 * tp)
           - s * t**2 / (2 * tp)
           + (tau**2 + p**2 + 3 * tp - 3 * tau - 3 * p + 1) * t / (6 * tp)
           + s * (1 / tau + 1 / p - 1) / 12)
    return complex(out) if np.ndim(out) == 0 else out


def gamma_heat_sides(t, tau, p, tol: Tolerance = SERIES_TOL):
    """Both sides of Gamma(t+tau, tau, tau+p) Gamma(t, tau+p, p) = Gamma(t, tau, p)."""
    lhs = ellgamma(t + tau, tau, tau + p, tol) * ellgamma(t, tau + p, p, tol)
    return lhs, ellgamma(t, tau, p, tol)


def gamma_modular_sides(t, tau, p, tol: Tolerance = SERIES_TOL):
    """Both sides of Gamma(t/p, tau/p, -1/p) = e^{i pi Q} Gamma((t-p)/tau, -1/tau, -p/tau) Gamma(t, tau, p)."""
    tau, p, t = complex(tau), complex(p), complex(t)
    for name, m in (("tau", tau), ("p", p), ("tau/p", tau / p), ("-1/p", -1 / p),
                    ("-1/tau", -1 / tau), ("-p/tau", -p / tau)):
        if not m.imag > 0:
            raise DomainError(f"transformed modulus {name} = {m} leaves the upper half plane")
    lhs = ellgamma(t / p, tau / p, -1 / p, tol)
    rhs = (np.exp(1j * math.pi * q_cubic(t, tau, p))
           * ellgamma((t - p) / tau, -1 / tau, -p / tau, tol)
           * ellgamma(t, tau, p, tol))
    return lhs, rhs


def verify_gamma_identity(kind: str, t, tau, p, tol: Tolerance = SERIES_TOL) -> float:
    """Relative residual |LHS - RHS| / (|LHS| + |RHS|) of the q-heat or modular equation."""
    if kind == "heat":
        lhs, rhs = gamma_heat_sides(t, tau, p, tol)
    elif kind == "modular":
        lhs, rhs = gamma_modular_sides(t, tau, p, tol)
    else:
        raise ValueError(f"unknown identity kind {kind!r}")
    return float(abs(lhs - rhs) / (abs(lhs) + abs(rhs)))
