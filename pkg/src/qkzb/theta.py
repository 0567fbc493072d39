"""First Jacobi theta function, its logarithmic derivative, and level-k thetas.

The odd theta function is

    theta(t, tau) = -sum_j exp(pi i (j+1/2)^2 tau + 2 pi i (j+1/2)(t+1/2)),

summed here in the equivalent paired form

    theta(t, tau) = 2 sum_{n>=0} (-1)^n q^{(n+1/2)^2} sin((2n+1) pi t),  q = e^{i pi tau},

which keeps full relative accuracy near the zeros t in Z.  All functions
accept numpy arrays for ``t``/``lam``; ``tau`` is a scalar.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonConvergence, PoleError
from .numerics import SERIES_TOL, Tolerance


@dataclass(frozen=True)
class UpperHalfPoint:
    value: complex

    def __post_init__(self):
        object.__setattr__(self, "value", complex(self.value))
        if not self.value.imag > 0:
            raise ValueError(f"{self.value} is not in the upper half plane")

    def __complex__(self):
        return self.value


def as_modulus(tau) -> complex:
    tau = complex(tau)
    if not tau.imag > 0:
        raise ValueError(f"modulus {tau} is not in the upper half plane")
    return tau


@dataclass(frozen=True)
class ThetaIndex:
    j: int
    level: int

    def __post_init__(self):
        if self.level < 1:
            raise ValueError("level must be a positive integer")
        object.__setattr__(self, "j", self.j % (2 * self.level))


def _series_length(im_tau: float, im_t: float, power: int, tol: Tolerance) -> int:
    """Number of paired terms N with tail sum_{n>=N} |term_n| below the tolerance.

    |term_n| <= (2n+1)^power exp(-pi im_tau (n+1/2)^2 + pi (2n+1) |im_t|).
    """
    def log_bound(n):
        x = n + 0.5
        return power * math.log(2 * x) - math.pi * im_tau * x * x + 2 * math.pi * x * im_t

    peak = max(log_bound(n) for n in range(0, 2 + int(im_t / im_tau) + power))
    for n in range(1, tol.max_evals):
        # beyond the maximum the ratio of consecutive bounds is < 1 and shrinking
        lb = log_bound(n)
        nxt = log_bound(n + 1)
        if nxt < lb:
            ratio = math.exp(nxt - lb)
            tail = math.exp(lb) / (1 - ratio)
            if tail <= tol.abs_tol + tol.rel_tol * math.exp(peak):
                return n
    raise NonConvergence(f"theta series needs more than {tol.max_evals} terms (Im tau = {im_tau})")


def _theta_sum(t, tau, deriv: int, tol: Tolerance):
    tau = as_modulus(tau)
    t = np.asarray(t, dtype=complex)
    im_t = float(np.max(np.abs(t.imag))) if t.size else 0.0
    N = _series_length(tau.imag, im_t, deriv, tol)
    n = np.arange(N)
    k = (2 * n + 1) * math.pi
    coeff = 2 * (-1.0) ** n * np.exp(1j * math.pi * tau * (n + 0.5) ** 2) * k**deriv
    arg = np.multiply.outer(t, k)
    # d^m/dt^m sin(k t) = k^m sin(k t + m pi/2)
    if deriv % 4 == 0:
        basis = np.sin(arg)
    elif deriv % 4 == 1:
        basis = np.cos(arg)
    elif deriv % 4 == 2:
        basis = -np.sin(arg)
    else:
        basis = -np.cos(arg)
    out = basis @ coeff
    return complex(out) if out.ndim == 0 else out


def theta1(t, tau, tol: Tolerance = SERIES_TOL):
    """Odd Jacobi theta function theta(t, tau)."""
    return _theta_sum(t, tau, 0, tol)


def theta1_dt(t, tau, tol: Tolerance = SERIES_TOL):
    return _theta_sum(t, tau, 1, tol)


def theta1_dt2(t, tau, tol: Tolerance = SERIES_TOL):
    return _theta_sum(t, tau, 2, tol)


def theta1_dt0(tau, tol: Tolerance = SERIES_TOL) -> complex:
    """theta'(0, tau)."""
    return _theta_sum(0.0, tau, 1, tol)


def _pole_guard(th, tau, tol):
    scale = abs(theta1_dt0(tau, tol))
    small = np.abs(th) < 1e-13 * scale
    if np.any(small):
        raise PoleError("theta(t, tau) vanishes: t lies on the lattice Z + tau Z")


def rho(t, tau, tol: Tolerance = SERIES_TOL):
    """Logarithmic derivative theta'/theta."""
    th = theta1(t, tau, tol)
    _pole_guard(th, tau, tol)
    return theta1_dt(t, tau, tol) / th


def rho_dt(t, tau, tol: Tolerance = SERIES_TOL):
    """rho'(t) = theta''/theta - (theta'/theta)^2, the Lame potential up to a constant."""
    th = theta1(t, tau, tol)
    _pole_guard(th, tau, tol)
    r = theta1_dt(t, tau, tol) / th
    return theta1_dt2(t, tau, tol) / th - r * r


def theta_level(idx: ThetaIndex, lam, tau, tol: Tolerance = SERIES_TOL):
    """Level-k theta function sum over r in Z + j/2k of exp(2 pi i k (r^2 tau + r lam))."""
    tau = as_modulus(tau)
    kappa = idx.level
    lam = np.asarray(lam, dtype=complex)
    shift = idx.j / (2 * kappa)
    im_lam = float(np.max(np.abs(lam.imag))) if lam.size else 0.0
    # |term| <= exp(-2 pi k (r^2 Im tau - |r| |Im lam|)), largest near |r| = center
    center = im_lam / (2 * tau.imag)
    log_peak = 2 * math.pi * kappa * center**2 * tau.imag

    def log_bound(r):
        return -2 * math.pi * kappa * (r * r * tau.imag - r * im_lam)

    N = int(math.ceil(center)) + 2
    while True:
        edge = N - 1.0
        ratio = math.exp(log_bound(edge + 1) - log_bound(edge))
        tail = 2 * math.exp(log_bound(edge)) / (1 - ratio)
        if tail <= tol.abs_tol + tol.rel_tol * math.exp(log_peak):
            break
        N += 1
        if N > tol.max_evals:
            raise NonConvergence("level-k theta series did not converge")
    r = np.arange(-N, N + 1) + shift
    phase = np.exp(2j * math.pi * kappa * r**2 * tau)
    out = np.exp(2j * math.pi * kappa * np.multiply.outer(lam, r)) @ phase
    return complex(out) if out.ndim == 0 else out


def odd_theta(idx: ThetaIndex, lam, tau, tol: Tolerance = SERIES_TOL):
    """theta_{j,k}(lam) - theta_{j,k}(-lam); spans the odd subspace for j != 0, k."""
    lam = np.asarray(lam, dtype=complex)
    if idx.j in (0, idx.level):
        # r -> -r maps the index set to itself, so theta_{j,k} is even
        out = np.zeros_like(lam)
    else:
        out = theta_level(idx, lam, tau, tol) - theta_level(idx, -lam, tau, tol)
    return complex(out) if np.ndim(out) == 0 else out
