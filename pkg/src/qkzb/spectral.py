"""Continuous-side checks: KZB-heat residuals, Calogero-Moser and Lame operators,
the m = 1 hypergeometric solution, the modular map and semiclassical order.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import BranchError, DomainError, FitUnstable, NonConvergence, PoleError
from .numerics import DEFAULT_TOL, EPS, Tolerance, _legendre, differentiate, power_principal
from .theta import as_modulus, rho, rho_dt, theta1, theta1_dt0

LAMBDA_STEP = 1e-3
TAU_STEP = 1e-3j


@dataclass(frozen=True)
class HeatSolutionSpec:
    """g(lam, tau) = exp(lam mu + mu^2 tau / (2 pi i kappa)), solving 2 pi i kappa g_tau = g_lamlam."""

    mu: complex
    kappa: complex

    def __post_init__(self):
        object.__setattr__(self, "mu", complex(self.mu))
        object.__setattr__(self, "kappa", complex(self.kappa))
        if self.kappa == 0:
            raise ValueError("kappa must be nonzero")

    def __call__(self, lam, tau):
        lam = np.asarray(lam, dtype=complex)
        out = np.exp(lam * self.mu + self.mu**2 * complex(tau) / (2j * math.pi * self.kappa))
        return complex(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LameParams:
    m: int
    tau: complex

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 0:
            raise ValueError("m must be a nonnegative integer")
        object.__setattr__(self, "tau", as_modulus(self.tau))

    @property
    def coupling(self) -> int:
        return self.m * (self.m + 1)


# --------------------------------------------------------------------------- KZB heat residual

def kzb_terms(v, lam, tau, kappa, m: int, steps=(LAMBDA_STEP, TAU_STEP)):
    """(2 pi i kappa v_tau, v_lamlam, m(m+1) rho' v) at (lam, tau)."""
    lam, tau, kappa = complex(lam), as_modulus(tau), complex(kappa)
    h_lam, h_tau = steps
    if (tau - 2 * complex(h_tau)).imag <= 0 and (tau + 2 * complex(h_tau)).imag <= 0:
        raise DomainError("tau stencil leaves the upper half plane")
    dtau = differentiate(lambda s: v(lam, s), tau, 1, h_tau)
    dlam2 = differentiate(lambda x: v(x, tau), lam, 2, h_lam)
    pot = m * (m + 1) * rho_dt(lam, tau) * complex(v(lam, tau)) if m else 0j
    return 2j * math.pi * kappa * dtau, dlam2, pot


def kzb_residual(v, lam, tau, kappa, m: int, steps=(LAMBDA_STEP, TAU_STEP)) -> float:
    """Scale-normalized residual of 2 pi i kappa v_tau = v_lamlam + m(m+1) rho'(lam, tau) v."""
    a, b, c = kzb_terms(v, lam, tau, kappa, m, steps)
    scale = abs(a) + abs(b) + abs(c)
    if scale == 0:
        return 0.0
    return float(abs(a - b - c) / scale)


# --------------------------------------------------------------------------- Calogero-Moser

def cm_apply(N: int, m: int, v, lams: Sequence[complex], tau, step=LAMBDA_STEP) -> complex:
    """(-H v)(lams) = sum_i v_{lam_i lam_i} + 2 m(m+1) sum_{i<j} rho'(lam_i - lam_j) v."""
    lams = np.asarray(lams, dtype=complex)
    if N < 2 or lams.shape != (N,):
        raise ValueError(f"need N >= 2 coordinates, got N = {N} and {lams.shape}")
    tau = as_modulus(tau)
    total = 0j
    for i in range(N):
        def along(x, i=i):
            pt = lams.copy()
            pt[i] = x
            return v(*pt)
        total += differentiate(along, lams[i], 2, step)
    if m:
        pot = 0j
        for i in range(N):
            for j in range(i + 1, N):
                pot += rho_dt(lams[i] - lams[j], tau)
        total += 2 * m * (m + 1) * pot * complex(v(*lams))
    return complex(total)


# --------------------------------------------------------------------------- Hermite / Bethe family

def _reduce_real(t: complex) -> complex:
    """Translate by integers so that Re t lies in [0, 1) (rho is 1-periodic)."""
    return complex(t.real - math.floor(t.real), t.imag)


def hermite_critical(mu, tau, tol: float = 1e-11, max_steps: int = 50) -> complex:
    """A solution t0 of rho(t0, tau) = mu, a critical point of exp(-mu t) theta(t, tau).

    Newton from the seeds 1/2, 1/2 +- 1/4, 1/2 +- tau/4.  The root is moved to
    Re t in [0, 1); roots with Im t in [0, Im tau) are preferred.  Shifts by tau
    change rho by -2 pi i, so the imaginary part is not reduced.
    """
    mu, tau = complex(mu), as_modulus(tau)
    seeds = (0.5, 0.75, 0.25, 0.5 + tau / 4, 0.5 - tau / 4)
    found = []
    for seed in seeds:
        t = complex(seed)
        for _ in range(max_steps):
            try:
                step = (rho(t, tau) - mu) / rho_dt(t, tau)
            except PoleError:
                break
            t -= step
            if not np.isfinite(t):
                break
            if abs(step) < 1e-15 * max(1.0, abs(t)):
                break
        if not np.isfinite(t):
            continue
        t = _reduce_real(t)
        try:
            if abs(rho(t, tau) - mu) < tol * max(1.0, abs(mu)):
                if 0 <= t.imag < tau.imag:
                    return t
                found.append(t)
        except PoleError:
            continue
    if found:
        return found[0]
    raise NonConvergence(f"no critical point found for mu = {mu}, tau = {tau}")


@dataclass(frozen=True)
class EigenReport:
    E: complex
    constancy_dev: float
    t0: complex


def hermite_function(mu, t0, tau) -> Callable:
    """v(lam) = exp(lam mu) theta(lam - t0, tau) / theta(lam, tau)."""
    mu, t0, tau = complex(mu), complex(t0), as_modulus(tau)

    def v(lam):
        return np.exp(lam * mu) * theta1(lam - t0, tau) / theta1(lam, tau)
    return v


def hermite_eigen(mu, tau, lam_grid, t0=None, step=LAMBDA_STEP) -> EigenReport:
    """Local Rayleigh quotient ((d^2 + 2 rho') v) / v over ``lam_grid`` and its spread."""
    mu, tau = complex(mu), as_modulus(tau)
    lam_grid = np.asarray(lam_grid, dtype=complex)
    if lam_grid.size < 8:
        raise ValueError("lam_grid needs at least 8 points")
    if t0 is None:
        t0 = hermite_critical(mu, tau)
    v = hermite_function(mu, t0, tau)
    quotients = np.array([
        (differentiate(v, lam, 2, step) + 2 * rho_dt(lam, tau) * v(lam)) / v(lam)
        for lam in lam_grid])
    E = complex(quotients.mean())
    spread = float(np.max(np.abs(quotients - E)))
    dev = spread / abs(E) if abs(E) >= 1 else spread
    return EigenReport(E, dev, complex(t0))


# --------------------------------------------------------------------------- hypergeometric m = 1 solution

LOOP_RADIUS = 0.25


def _hyper_parts(kappa, g, lam, tau, shift_sign=1):
    """Integrand pieces: h(t) = t^(a-1) phi(t) near t = 0, a = -2/kappa."""
    a = -2.0 / kappa
    th0 = theta1_dt0(tau)
    lam = np.asarray(lam, dtype=complex)
    th_lam = theta1(lam, tau)
    if np.any(np.abs(th_lam) < 1e-13 * abs(th0)):
        raise PoleError("lam lies on a zero of theta(., tau)")

    def ratio(t, lam_):
        # theta(lam - t) theta'(0) / (theta(lam) theta(t)) times g(lam +- 2t/kappa, tau)
        return (theta1(lam_ - t, tau) * th0 / (theta1(lam_, tau) * theta1(t, tau))
                * g(lam_ + shift_sign * 2 * t / kappa, tau))

    return a, th0, ratio


def _gl_nodes(a_, b_, panels, order=16):
    x, w = _legendre(order)
    edges = np.linspace(a_, b_, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


def _hyper_sum(kappa, g, lam, tau, panels, shift_sign=1):
    """Finite-part value on a fixed node set, for an array of lam."""
    a, th0, ratio = _hyper_parts(kappa, g, lam, tau, shift_sign)
    lam = np.asarray(lam, dtype=complex)[..., None]
    c = LOOP_RADIUS
    total = 0j
    mass = 0.0

    # middle segment [c, 1 - c]: the power factor must be real positive there
    t, w = _gl_nodes(c, 1 - c, panels)
    base = theta1(t, tau) / th0
    if np.any(np.abs(base.imag) > 1e-8 * np.abs(base)) or np.any(base.real <= 0):
        raise BranchError("theta(t, tau)/theta'(0, tau) leaves the positive axis on (0, 1)")
    terms = w * base.real ** a * ratio(t, lam)
    total = total + terms.sum(axis=-1)
    mass = mass + np.abs(terms).sum(axis=-1)

    # endpoint loops: FP int_0^c s^(a-1) phi(s) ds = loop / (e^{2 pi i a} - 1)
    ang, wang = _gl_nodes(0.0, 2 * math.pi, 4 * panels)
    s = c * np.exp(1j * ang)
    denom = cmath.exp(2j * math.pi * a) - 1
    if abs(denom) < 1e-8:
        raise DomainError("finite part undefined: -2/kappa is an integer")
    for t_end, sign in ((0.0, 1.0), (1.0, -1.0)):
        t_loop = t_end + sign * s
        # theta(1 - s) = theta(s), so both ends share the factor (s * local)^a
        local = theta1(s, tau) / (s * th0)
        if np.any(local.real <= 0):
            raise BranchError("theta(s)/(s theta'(0)) is not in the right half plane on the loop")
        # h(t) dt with t^(a-1) on arg in (0, 2 pi); s^a = c^a e^{i a ang}
        s_pow_a = c**a * np.exp(1j * a * ang)
        phi = power_principal(local, a) * ratio(t_loop, lam)
        # the end segment is int_0^c h(t_end + sign s) ds with h = s^a phi, ds = i s d(ang)
        loop = wang * 1j * s * s_pow_a * phi
        total = total + loop.sum(axis=-1) / denom
        mass = mass + np.abs(loop).sum(axis=-1) / abs(denom)
    return total, mass, t.size + 2 * s.size


def hypergeom_m1(kappa: float, g, lam, tau, tol: Tolerance = DEFAULT_TOL, shift_sign: int = 1):
    """v(lam, tau) = int_0^1 (theta(t)/theta'(0))^(-2/kappa) theta(lam-t) theta'(0)/(theta(lam) theta(t)) g(lam + 2t/kappa) dt.

    The integrand behaves like t^(-2/kappa - 1) at both ends, so the integral is
    taken as its Hadamard finite part (the analytic continuation in the
    exponent), computed by loops of radius 1/4 around t = 0 and t = 1.
    ``lam`` may be an array; ``tau`` must be purely imaginary.

    With theta(lam - t) in the integrand, g must be evaluated at lam + 2t/kappa
    for v to solve the m = 1 equation; ``shift_sign=-1`` gives g(lam - 2t/kappa),
    which solves it only when g is constant.
    """
    kappa = float(kappa)
    if not kappa > 2:
        raise DomainError("kappa must exceed 2")
    tau = as_modulus(tau)
    if abs(tau.real) > 1e-14:
        raise BranchError("hypergeometric solution is validated for purely imaginary tau only")
    panels = 2
    evals = 0
    prev = None
    while True:
        value, mass, n = _hyper_sum(kappa, g, lam, tau, panels, shift_sign)
        evals += n
        if prev is not None:
            err = np.maximum(np.abs(value - prev), 64 * EPS * mass)
            if np.all(err <= np.maximum(tol.abs_tol, tol.rel_tol * np.abs(value))):
                return complex(value) if np.ndim(value) == 0 else value
            if evals > tol.max_evals:
                raise NonConvergence(f"hypergeometric integral stalled at error {np.max(err):.3g}")
        prev = value
        panels *= 2


# --------------------------------------------------------------------------- modular map

def modular_map_classical(v, kappa=1.0):
    """v~(lam, tau) = tau^(-1/2) exp(-pi i kappa lam^2 / 2 tau) v(lam/tau, -1/tau).

    Maps solutions of 2 pi i kappa v_tau = v_lamlam to solutions; the Gaussian
    factor carries kappa (for kappa = 1 it is exp(-pi i lam^2 / 2 tau)).
    """
    kappa = complex(kappa)

    def tilde(lam, tau):
        tau = as_modulus(tau)
        return (np.exp(-1j * math.pi * kappa * np.asarray(lam) ** 2 / (2 * tau)) / cmath.sqrt(tau)
                * v(np.asarray(lam) / tau, -1 / tau))
    return tilde


def shift_map(v):
    """v~(lam, tau) = v(lam, tau + 1)."""
    return lambda lam, tau: v(lam, complex(tau) + 1)


# --------------------------------------------------------------------------- semiclassical order

@dataclass(frozen=True)
class SemiclassicalReport:
    slope: float
    coeff_check: float
    fit_residual: float
    deviations: tuple


def semiclassical_order(T_family, v, lam, tau, kappa, eta_list, decay: float = 0.0,
                        tol: Tolerance = Tolerance(1e-13, 1e-13), coeff_check: bool = True) -> SemiclassicalReport:
    """Order in eta of D(eta) = (T(tau, tau+p) v(., tau+p))(lam) - v(lam, tau), p = -2 kappa eta.

    ``T_family(tau, p, eta)`` builds the operator.  The slope of log|D| against
    log|eta| is fitted by least squares; ``coeff_check`` compares D/eta at the
    smallest eta with (i/pi)(2 pi i kappa v_tau - v_lamlam).
    """
    lam, tau, kappa = complex(lam), as_modulus(tau), complex(kappa)
    etas = [complex(e) for e in eta_list]
    if any(not e.imag < 0 for e in etas):
        raise DomainError("every eta must have negative imaginary part")
    mags = np.array([abs(e) for e in etas])
    if mags.max() / mags.min() < 10 * (1 - 1e-9):
        raise DomainError("eta magnitudes must span at least one decade")
    v0 = complex(v(lam, tau))
    devs = []
    for eta in etas:
        p = -2 * kappa * eta
        T = T_family(tau, p, eta)
        shifted = tau + p
        out = T.apply(lambda mu, s=shifted: v(mu, s), decay, tol)(lam)
        devs.append(complex(out) - v0)
    logd = np.log(np.abs(devs))
    loge = np.log(mags)
    A = np.vstack([loge, np.ones_like(loge)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, logd, rcond=None)
    resid = float(np.max(np.abs(A @ np.array([slope, icpt]) - logd)))
    if resid > 0.1:
        raise FitUnstable(f"log-log fit residual {resid:.3g} exceeds 0.1 (slope {slope:.3f})")
    check = float("nan")
    if coeff_check:
        a, b, _ = kzb_terms(v, lam, tau, kappa, 0)
        predicted = 1j / math.pi * (a - b)
        k = int(np.argmin(mags))
        if abs(predicted) > 0:
            check = float(abs(devs[k] / etas[k] - predicted) / abs(predicted))
    return SemiclassicalReport(float(slope), check, resid, tuple(devs))
