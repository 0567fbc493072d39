"""Quadrature, differentiation and branch conventions on the complex plane.

Every integral returns a :class:`QuadratureResult`.  Integrands are called
with numpy arrays of nodes when they accept them; scalar-only callables are
evaluated node by node.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import expit

from .errors import DecayViolation, DomainError, NonConvergence

AnalyticFunction = Callable[..., complex]

EPS = np.finfo(float).eps


@dataclass(frozen=True)
class Tolerance:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_evals: int = 2**20

    def __post_init__(self):
        if self.abs_tol < 0 or self.rel_tol < 0:
            raise ValueError("tolerances must be non-negative")
        if self.abs_tol + self.rel_tol <= 0:
            raise ValueError("abs_tol + rel_tol must be positive")
        if int(self.max_evals) < 16:
            raise ValueError("max_evals must be at least 16")

    def target(self, value) -> float:
        return max(self.abs_tol, self.rel_tol * abs(value))

    def replace(self, **changes) -> "Tolerance":
        fields = dict(abs_tol=self.abs_tol, rel_tol=self.rel_tol, max_evals=self.max_evals)
        fields.update(changes)
        return Tolerance(**fields)


DEFAULT_TOL = Tolerance()
# Series and products are cheap; they are summed to working precision.
SERIES_TOL = Tolerance(abs_tol=0.0, rel_tol=1e-17, max_evals=2**16)


@dataclass(frozen=True)
class QuadratureResult:
    value: complex
    err_estimate: float
    evals: int

    def __complex__(self):
        return complex(self.value)


@dataclass(frozen=True)
class LineContour:
    """The segment ``center + direction * s`` for ``s`` in ``[-R, R]``."""

    direction: complex
    truncation_radius: float
    center: complex = 0j

    def __post_init__(self):
        if self.direction == 0:
            raise ValueError("contour direction must be nonzero")
        if not self.truncation_radius > 0:
            raise ValueError("truncation radius must be positive")

    @classmethod
    def from_decay(cls, direction, decay: float, tol: Tolerance = DEFAULT_TOL,
                   center=0j, drift: float = 0.0) -> "LineContour":
        """Size R so that ``exp(-decay*s**2 + drift*|s|)`` is below ``abs_tol/10``.

        ``decay`` is the Gaussian rate in the contour parameter ``s``; ``drift``
        bounds any additional linear exponential growth of the integrand.
        """
        if not decay > 0:
            raise DecayViolation(f"integrand does not decay along the contour (rate {decay})")
        budget = math.log(10.0 / max(tol.abs_tol, 1e-300))
        # positive root of decay*R^2 - drift*R - budget = 0
        radius = (drift + math.sqrt(drift * drift + 4.0 * decay * budget)) / (2.0 * decay)
        return cls(complex(direction), radius, complex(center))


def _evaluate(f, nodes: np.ndarray) -> np.ndarray:
    try:
        with np.errstate(all="ignore"):
            values = np.asarray(f(nodes), dtype=complex)
        if values.shape != nodes.shape:
            raise TypeError
    except (TypeError, ValueError):
        values = np.empty(nodes.shape, dtype=complex)
        for k, z in enumerate(nodes):
            try:
                values[k] = f(complex(z))
            except (ArithmeticError, ValueError) as exc:
                raise DomainError(f"integrand failed at node {complex(z)}: {exc}") from exc
    if not np.all(np.isfinite(values)):
        bad = nodes[~np.isfinite(values)][0]
        raise DomainError(f"integrand is not finite at node {complex(bad)}")
    return values


@lru_cache(maxsize=None)
def _legendre(order: int):
    return np.polynomial.legendre.leggauss(order)


def _gauss_legendre(f, a: complex, b: complex, panels: int, order: int):
    x, w = _legendre(order)
    edges = np.linspace(0.0, 1.0, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    u = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wu = (half[:, None] * w[None, :]).ravel()
    nodes = a + (b - a) * u
    values = _evaluate(f, nodes)
    weights = (b - a) * wu
    terms = weights * values
    return complex(terms.sum()), float(np.abs(terms).sum()), nodes.size


def _tanh_sinh(f, a: complex, b: complex, level: int, kh_max: float = 6.1):
    # kh_max = 6.1 carries the nodes to ~1e-300 from an endpoint at 0
    h = 2.0 ** (-level)
    k = np.arange(-int(kh_max / h), int(kh_max / h) + 1)
    s = k * h
    v = 0.5 * np.pi * np.sinh(s)
    left = expit(2.0 * v)
    right = expit(-2.0 * v)
    # distances to the nearer endpoint are formed without cancellation
    nodes = np.where(v < 0, a + (b - a) * left, b - (b - a) * right)
    dist = np.abs(b - a) * np.where(v < 0, left, right)
    weights = (b - a) * 2.0 * left * right * 0.5 * np.pi * np.cosh(s) * h
    keep = (weights != 0) & (nodes != a) & (nodes != b)
    nodes, weights, dist, v = nodes[keep], weights[keep], dist[keep], v[keep]
    values = _evaluate(f, nodes)
    terms = weights * values
    # Rounding a node next to an endpoint moves it by ~eps|x| relative to its
    # distance d from that endpoint; near an algebraic singularity this perturbs
    # the term by ~|term| eps |x| / d.  The mass beyond the innermost nodes,
    # which round onto the endpoints, is bounded by ~2 d |f| there.
    moved = np.abs(terms) * EPS * np.abs(nodes) / dist
    tail = 2.0 * (dist[0] * abs(values[0]) + dist[-1] * abs(values[-1]))
    floor = float(moved.sum() + tail)
    return complex(terms.sum()), float(np.abs(terms).sum()), nodes.size, floor


def integrate_segment(f: AnalyticFunction, a, b, tol: Tolerance = DEFAULT_TOL,
                      endpoint_singular: bool = False, min_panels: int = 1,
                      order: int = 16) -> QuadratureResult:
    """Integrate ``f`` along the straight segment from ``a`` to ``b``.

    Smooth integrands use composite Gauss-Legendre with the panel count
    doubled until two successive levels agree.  With ``endpoint_singular``
    the tanh-sinh rule is used instead, halving the step until agreement;
    it tolerates integrable algebraic blow-up at either end.
    """
    a, b = complex(a), complex(b)
    if a == b:
        return QuadratureResult(0j, 0.0, 0)
    evals = 0
    previous = None
    level = 0
    while True:
        floor = 0.0
        if endpoint_singular:
            value, mass, n, floor = _tanh_sinh(f, a, b, level)
        else:
            value, mass, n = _gauss_legendre(f, a, b, min_panels * 2**level, order)
        evals += n
        if previous is not None:
            err = float(max(abs(value - previous), 64 * EPS * mass, floor))
            if err <= tol.target(value):
                return QuadratureResult(value, err, evals)
            if evals > tol.max_evals:
                raise NonConvergence(
                    f"quadrature on [{a}, {b}] stalled at error {err:.3g} after {evals} evaluations")
        previous = value
        level += 1
        if endpoint_singular and level > 12:
            raise NonConvergence(f"tanh-sinh refinement exhausted on [{a}, {b}]")


def integrate_line(f: AnalyticFunction, contour: LineContour,
                   tol: Tolerance = DEFAULT_TOL, min_panels: int = 8) -> QuadratureResult:
    """Integrate ``f(mu) dmu`` along ``center + direction*R`` truncated to ``|s| <= R``."""
    eta, c, R = contour.direction, contour.center, contour.truncation_radius

    def pulled_back(s):
        return f(c + eta * s) * eta

    result = integrate_segment(pulled_back, -R, R, tol, min_panels=min_panels)
    ends = np.abs(_evaluate(pulled_back, np.array([-R, R], dtype=complex)))
    probe = np.linspace(-R, R, 65).astype(complex)
    peak = float(np.abs(_evaluate(pulled_back, probe)).max())
    budget = max(tol.abs_tol, tol.rel_tol * max(abs(result.value), peak)) / 10.0
    if ends.max() > 10.0 * budget:
        raise DecayViolation(
            f"|integrand| = {ends.max():.3g} at the truncation radius {R:.3g} exceeds budget {budget:.3g}")
    return result


def differentiate(f: AnalyticFunction, z, order: int = 1, step=1e-3) -> complex:
    """Central difference of ``f`` at ``z`` with one Richardson level (error O(step**4)).

    ``step`` may be complex; the stencil runs along that direction.
    """
    z = complex(z)
    h = complex(step)
    if h == 0:
        raise ValueError("step must be nonzero")

    def value(x):
        try:
            out = complex(f(x))
        except (ArithmeticError, ValueError) as exc:
            raise DomainError(f"stencil point {x} outside the domain of f: {exc}") from exc
        if not np.isfinite(out):
            raise DomainError(f"f is not finite at stencil point {x}")
        return out

    if order == 1:
        def central(d):
            return (value(z + d) - value(z - d)) / (2 * d)
    elif order == 2:
        f0 = value(z)

        def central(d):
            return (value(z + d) - 2 * f0 + value(z - d)) / (d * d)
    else:
        raise ValueError("order must be 1 or 2")
    coarse, fine = central(h), central(h / 2)
    return (4 * fine - coarse) / 3


def power_principal(z, s):
    """``z**s`` on the principal branch, ``arg z`` in ``(-pi, pi]``."""
    z = np.asarray(z, dtype=complex)
    s = np.asarray(s, dtype=complex)
    # -0.0 imaginary parts would otherwise select arg = -pi
    z = np.where(z.imag == 0, z.real + 0j, z)
    zero = z == 0
    if np.any(zero & (np.broadcast_to(s, z.shape).real <= 0)):
        raise DomainError("0 raised to a power with non-positive real part")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.exp(s * np.log(np.where(zero, 1, z)))
    out = np.where(zero, 0j, out)
    return complex(out) if out.ndim == 0 else out


def sqrt_principal(z):
    return power_principal(z, 0.5)
