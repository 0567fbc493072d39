"""Elliptic kernel and integral translation operator for the m = 1 heat equation.

The kernel is

    u(lam, mu, tau, p, eta) = exp(-i pi lam mu / 2 eta)
        * int_0^1 Omega_{2 eta}(t, tau, p) theta(lam+t, tau) theta(mu+t, p)
                  / (theta(t-2 eta, tau) theta(t-2 eta, p)) dt

and the translation operator T(tau, tau+p) is

    (T f)(lam) = -(1 / 4 pi sqrt(i eta)) exp(-i pi lam^2 / 4 eta)
        * int u(lam, mu, tau, tau+p, eta) K(mu) exp(-i pi mu^2 / 4 eta) f(-mu) dmu,
    K(mu) = theta(4 eta, tau+p) theta'(0, tau+p) / (theta(mu-2eta, tau+p) theta(mu+2eta, tau+p)).

K has simple poles at mu = +-2 eta, which lie on the line eta R itself.  The
contour used here is the line eta R translated to pass to the left of both
poles (real offset in (-1, 0)); see :func:`translation_one`.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, FresnelDivergence, NonConvergence, PoleError
from .flat import LinearOp
from .gamma import omega
from .numerics import DEFAULT_TOL, LineContour, Tolerance, integrate_line, integrate_segment, power_principal
from .theta import as_modulus, theta1, theta1_dt0

POLE_THRESHOLD = 1e-10


@dataclass(frozen=True)
class KernelArgs:
    lam: complex
    mu: complex
    tau: complex
    p: complex
    eta: complex

    def __post_init__(self):
        for name in ("lam", "mu", "eta"):
            object.__setattr__(self, name, complex(getattr(self, name)))
        object.__setattr__(self, "tau", as_modulus(self.tau))
        object.__setattr__(self, "p", as_modulus(self.p))
        if not self.eta.imag < 0:
            raise DomainError(f"the kernel needs Im(eta) < 0, got eta = {self.eta}")
        _check_denominators(self.tau, self.p, self.eta)


def _check_denominators(tau, p, eta, samples: int = 257):
    """PoleError if theta(t - 2 eta, .) nearly vanishes for some t in [0, 1]."""
    t = np.linspace(0.0, 1.0, samples)
    for m in (tau, p):
        scale = abs(theta1_dt0(m))
        if np.min(np.abs(theta1(t - 2 * eta, m))) < POLE_THRESHOLD * scale:
            raise PoleError(f"theta(t - 2 eta, {m}) vanishes on the integration segment")


def _inner_weight(t, tau, p, eta):
    """Omega_{2 eta}(t) / (theta(t - 2 eta, tau) theta(t - 2 eta, p))."""
    return omega(2 * eta, t, tau, p) / (theta1(t - 2 * eta, tau) * theta1(t - 2 * eta, p))


def kernel_integrand(args: KernelArgs, omega_scale: complex = 1.0):
    def f(t):
        return (omega_scale * _inner_weight(t, args.tau, args.p, args.eta)
                * theta1(args.lam + t, args.tau) * theta1(args.mu + t, args.p))
    return f


def kernel_u(args: KernelArgs, tol: Tolerance = DEFAULT_TOL, min_panels: int = 1) -> complex:
    """u(lam, mu, tau, p, eta) by adaptive Gauss-Legendre over [0, 1]."""
    integral = integrate_segment(kernel_integrand(args), 0.0, 1.0, tol, min_panels=min_panels)
    return cmath.exp(-1j * math.pi * args.lam * args.mu / (2 * args.eta)) * integral.value


# --------------------------------------------------------------------------- vectorized kernel

@dataclass(frozen=True)
class KernelGrid:
    """Periodic trapezoid rule for the t-integral, shared by all (lam, mu).

    The t-integrand is 1-periodic and analytic near the real segment, so the
    trapezoid rule converges geometrically in the node count.
    """

    tau: complex
    p: complex
    eta: complex
    nodes: np.ndarray
    weights: np.ndarray
    err_estimate: float

    def __call__(self, lam, mu, omega_scale: complex = 1.0):
        """u on the outer product of ``lam`` and ``mu`` (shape ``lam.shape + mu.shape``)."""
        lam = np.asarray(lam, dtype=complex)
        mu = np.asarray(mu, dtype=complex)
        a = theta1(np.add.outer(lam.ravel(), self.nodes), self.tau)
        b = theta1(np.add.outer(mu.ravel(), self.nodes), self.p)
        integral = (a * (omega_scale * self.weights)) @ b.T
        out = np.exp(-1j * math.pi * np.multiply.outer(lam.ravel(), mu.ravel()) / (2 * self.eta)) * integral
        return out.reshape(lam.shape + mu.shape)


def _trapezoid(tau, p, eta, n):
    t = (np.arange(n) + 0.5) / n
    return t, _inner_weight(t, tau, p, eta) / n


@lru_cache(maxsize=64)
def _kernel_grid_cached(tau, p, eta, rel_tol, max_nodes):
    _check_denominators(tau, p, eta)
    probe_lam = np.array([0.0, 0.3, 0.1 + 0.2j])
    n = 32
    t, w = _trapezoid(tau, p, eta, n)

    def moments(t, w):
        a = theta1(np.add.outer(probe_lam, t), tau)
        b = theta1(np.add.outer(probe_lam, t), p)
        return (a * w) @ b.T

    prev = moments(t, w)
    while True:
        n *= 2
        if n > max_nodes:
            raise NonConvergence(f"kernel grid did not converge with {max_nodes} nodes")
        t, w = _trapezoid(tau, p, eta, n)
        cur = moments(t, w)
        err = float(np.max(np.abs(cur - prev)))
        scale = float(np.max(np.abs(cur)))
        if err <= max(rel_tol * scale, 1e-15 * scale):
            return KernelGrid(tau, p, eta, t, w, err)
        prev = cur


def kernel_grid(tau, p, eta, tol: Tolerance = DEFAULT_TOL) -> KernelGrid:
    tau, p, eta = as_modulus(tau), as_modulus(p), complex(eta)
    if not eta.imag < 0:
        raise DomainError(f"the kernel needs Im(eta) < 0, got eta = {eta}")
    return _kernel_grid_cached(tau, p, eta, min(tol.rel_tol, 1e-12), min(tol.max_evals, 2**14))


# --------------------------------------------------------------------------- translation operator

def contour_offset(lam) -> float:
    """Real offset of the line eta R: the saddle -Re(lam), kept in [-0.75, -0.25].

    Any offset in (-1, 0) gives the same value; this keeps the kernel poles at
    mu = +-2 eta (and their integer translates) well away from the nodes.
    """
    return float(min(max(-complex(lam).real, -0.75), -0.25))


def translation_one(tau, p, eta, omega_scale: complex = 1.0) -> LinearOp:
    """The m = 1 operator T(tau, tau + p) as a numeric LinearOp.

    ``omega_scale`` multiplies Omega in the inner kernel (detector checks only).
    """
    tau, p, eta = as_modulus(tau), as_modulus(p), complex(eta)
    if not eta.imag < 0:
        raise FresnelDivergence(f"the Gaussian kernel needs Im(eta) < 0, got eta = {eta}")
    tp = tau + p
    for z in (4 * eta, 2 * eta):
        if abs(theta1(z, tp)) < POLE_THRESHOLD * abs(theta1_dt0(tp)):
            raise PoleError(f"theta({z}, tau + p) vanishes")
    pref = -1 / (4 * math.pi * power_principal(1j * eta, 0.5))
    numer = theta1(4 * eta, tp) * theta1_dt0(tp)
    # Gaussian rate of exp(-i pi (lam + mu)^2 / 4 eta) along eta R, less the
    # net theta growth exp(pi y^2 / Im(tau+p)) left after K cancels one factor
    kernel_rate = -math.pi * eta.imag / 4 - math.pi * eta.imag**2 / tp.imag

    def numeric(f, decay, tol):
        grid = kernel_grid(tau, tp, eta, tol)
        rate = kernel_rate + decay
        if not rate > 0:
            raise FresnelDivergence(f"T integrand does not decay along eta R (rate {rate:.3g})")

        def g(lam):
            lam_arr = np.atleast_1d(np.asarray(lam, dtype=complex))
            out = np.empty(lam_arr.shape, dtype=complex)
            for n, l in enumerate(lam_arr.ravel()):
                contour = LineContour.from_decay(eta, rate, tol, center=contour_offset(l), drift=1.0)

                def integrand(mu, l=l):
                    mu = np.asarray(mu, dtype=complex)
                    den = theta1(mu - 2 * eta, tp) * theta1(mu + 2 * eta, tp)
                    u = grid(np.array([l]), mu, omega_scale)[0]
                    return (u * numer / den * np.exp(-1j * math.pi * (l * l + mu * mu) / (4 * eta))
                            * f(-mu))

                out.flat[n] = pref * integrate_line(integrand, contour, tol).value
            return complex(out[0]) if np.ndim(lam) == 0 else out.reshape(np.shape(lam))
        return g

    return LinearOp(f"T_one(eta={eta:g})", numeric, None)


def projective_sides_one(lam, mu, tau, p, eta, tol: Tolerance = DEFAULT_TOL,
                         omega_scale: complex = 1.0):
    """u(lam, mu, tau, p) and exp(-i pi mu^2 / 4 eta) (T(tau, tau+p) u(., mu, tau+p, p))(lam).

    ``omega_scale`` perturbs Omega on the left-hand side only.
    """
    lam, mu, eta = complex(lam), complex(mu), complex(eta)
    tau, p = as_modulus(tau), as_modulus(p)
    lhs = complex(kernel_grid(tau, p, eta, tol)(np.array([lam]), np.array([mu]), omega_scale)[0, 0])
    outer = kernel_grid(tau + p, p, eta, tol)

    def operand(nu):
        nu = np.asarray(nu, dtype=complex)
        return outer(nu.ravel(), np.array([mu]))[:, 0].reshape(nu.shape)

    # operand u(nu, mu) grows like theta(nu + t, tau + p) in Im nu
    growth = -math.pi * eta.imag**2 / (tau + p).imag
    T = translation_one(tau, p, eta)
    rhs = cmath.exp(-1j * math.pi * mu**2 / (4 * eta)) * T.apply(operand, growth, tol)(lam)
    return lhs, rhs


def projective_residual_one(lam, mu, tau, p, eta, tol: Tolerance = DEFAULT_TOL,
                            omega_scale: complex = 1.0) -> float:
    """Relative residual of u(lam, mu, tau, p) = exp(-i pi mu^2/4 eta) (T u(., mu, tau+p, p))(lam)."""
    lhs, rhs = projective_sides_one(lam, mu, tau, p, eta, tol, omega_scale)
    return float(abs(lhs - rhs) / (abs(lhs) + abs(rhs)))
