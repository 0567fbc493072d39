"""Discrete projectively flat connection for the free (m = 0) heat equation.

Operators act on functions of ``lam``.  Every operator carries a numeric
action (contour quadrature) and, where available, an exact action on
Gaussians ``c * exp(i pi (a lam^2 + 2 b lam))``.  Relation checks run on the
exact action; quadrature is the spot check.

Conventions
-----------
* ``U(x)`` integrates over the line ``x3 * R`` parametrised as ``mu = x3 s``,
  ``s`` increasing, so ``dmu = x3 ds``.
* ``U(x)^{-1}`` is ``(4 x3)^{-1}`` times the integral with the conjugate
  kernel ``exp(+i pi lam mu / 2 x3)``.  On Gaussians where both integrals
  converge this is the exact inverse of ``U``.
* A Gaussian over the base point ``x`` has fibre parameter ``t = 4 a x3``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from itertools import permutations
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateBasePoint, DomainError, FresnelDivergence, MatrixMismatch, PoleError, ZeroQuad
from .numerics import DEFAULT_TOL, LineContour, Tolerance, integrate_line, power_principal


# --------------------------------------------------------------------------- base points

@dataclass(frozen=True)
class BasePoint:
    x1: complex
    x2: complex
    x3: complex

    def __post_init__(self):
        for name in ("x1", "x2", "x3"):
            value = complex(getattr(self, name))
            object.__setattr__(self, name, value)
            if value == 0:
                raise DegenerateBasePoint(f"coordinate {name} of a base point must be nonzero")

    @property
    def coords(self) -> np.ndarray:
        return np.array([self.x1, self.x2, self.x3])

    @classmethod
    def from_vector(cls, v) -> "BasePoint":
        return cls(*[complex(c) for c in v])

    def act(self, matrix) -> "BasePoint":
        """Left action x -> g x of an integer matrix."""
        return BasePoint.from_vector(np.asarray(matrix) @ self.coords)


# --------------------------------------------------------------------------- Gaussians

@dataclass(frozen=True)
class GaussianElem:
    """The function ``coeff * exp(i pi (quad lam^2 + 2 lin lam))``."""

    coeff: complex
    quad: complex
    lin: complex = 0j

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=complex)
        out = self.coeff * np.exp(1j * math.pi * (self.quad * lam * lam + 2 * self.lin * lam))
        return complex(out) if out.ndim == 0 else out

    def fiber_parameter(self, x: BasePoint) -> complex:
        return 4 * self.quad * x.x3

    @classmethod
    def from_fiber(cls, t, x: BasePoint, coeff=1.0) -> "GaussianElem":
        return cls(complex(coeff), complex(t) / (4 * x.x3))

    def decay_along(self, direction) -> float:
        """Gaussian rate c in |f(direction * s)| ~ exp(-c s^2)."""
        return math.pi * (self.quad * complex(direction) ** 2).imag


def _fresnel(A: complex, strict: bool = True) -> complex:
    """(-i A)^{-1/2}, the value of int exp(i pi A s^2) ds over the real line.

    With ``strict=False`` the principal-branch closed form is used even where
    the integral diverges (analytic continuation in A).
    """
    w = -1j * A
    if w == 0:
        raise ZeroQuad("degenerate Gaussian: A = 0")
    if strict and not w.real > 0:
        raise FresnelDivergence(f"exp(i pi A s^2) does not decay for A = {A}")
    return power_principal(w, -0.5)


# --------------------------------------------------------------------------- linear operators

NumericAction = Callable[[Callable, float, Tolerance], Callable]
GaussianAction = Callable[[GaussianElem], GaussianElem]


@dataclass(frozen=True)
class LinearOp:
    """A linear operator on functions of ``lam``.

    ``numeric(f, decay, tol)`` returns a callable of ``lam``.  ``decay`` is the
    operand's own Gaussian rate along the operator's contour (0 for operands of
    at most linear-exponential growth; negative if the operand grows).
    """

    name: str
    numeric: NumericAction | None = None
    gaussian: GaussianAction | None = None
    factors: tuple = field(default=(), repr=False)
    inverse: Callable[[], "LinearOp"] | None = field(default=None, repr=False, compare=False)

    def apply(self, f, decay: float = 0.0, tol: Tolerance = DEFAULT_TOL):
        if self.numeric is None:
            raise NotImplementedError(f"{self.name} has no numeric action")
        return self.numeric(f, decay, tol)

    def apply_gaussian(self, g: GaussianElem) -> GaussianElem:
        if self.gaussian is None:
            raise NotImplementedError(f"{self.name} has no exact Gaussian action")
        try:
            return self.gaussian(g)
        except FresnelDivergence as exc:
            raise type(exc)(f"{self.name}: {exc}") from exc

    def __matmul__(self, other: "LinearOp") -> "LinearOp":
        """Composition ``self o other`` (``other`` acts first)."""
        def numeric(f, decay, tol, _a=self, _b=other):
            # intermediate functions are not Gaussian-decaying in general
            return _a.numeric(_b.numeric(f, decay, tol), 0.0, tol)

        def gaussian(g, _a=self, _b=other):
            return _a.apply_gaussian(_b.apply_gaussian(g))

        both_numeric = self.numeric is not None and other.numeric is not None
        both_gaussian = self.gaussian is not None and other.gaussian is not None
        return LinearOp(f"{self.name}*{other.name}", numeric if both_numeric else None,
                        gaussian if both_gaussian else None,
                        (self.factors or (self,)) + (other.factors or (other,)))

    def with_name(self, name: str) -> "LinearOp":
        return LinearOp(name, self.numeric, self.gaussian, self.factors, self.inverse)


def identity_op() -> LinearOp:
    return LinearOp("1", lambda f, decay, tol: f, lambda g: g, inverse=identity_op)


def multiplier(quad_shift: complex, name: str) -> LinearOp:
    """f(lam) -> exp(i pi quad_shift lam^2) f(lam)."""
    m = complex(quad_shift)

    def numeric(f, decay, tol):
        def g(lam):
            lam = np.asarray(lam, dtype=complex)
            return np.exp(1j * math.pi * m * lam * lam) * f(lam)
        return g

    def gaussian(g):
        return GaussianElem(g.coeff, g.quad + m, g.lin)

    return LinearOp(name, numeric, gaussian, inverse=lambda: multiplier(-m, f"{name}^-1"))


def op_alpha(x3) -> LinearOp:
    x3 = complex(x3)
    if x3 == 0:
        raise DegenerateBasePoint("alpha(x3) needs x3 != 0")
    return multiplier(-1 / (4 * x3), f"alpha({x3:g})")


def op_beta(x: BasePoint | Sequence) -> LinearOp:
    x1, x2, x3 = _triple(x)
    if x2 == 0 or x3 == 0:
        raise DegenerateBasePoint(f"beta{(x1, x2, x3)} needs x2, x3 != 0")
    return multiplier(-x1 / (4 * x2 * x3), f"beta({x1:g},{x2:g},{x3:g})")


def _triple(x):
    if isinstance(x, BasePoint):
        return x.x1, x.x2, x.x3
    x1, x2, x3 = (complex(c) for c in x)
    return x1, x2, x3


def _contour_transform(f, direction, sign: int, scale: complex, decay: float, tol: Tolerance):
    """lam -> scale * int_{direction R} exp(-sign i pi lam mu / 2 direction) f(-mu) dmu."""
    eta = complex(direction)

    def g(lam):
        lam_arr = np.atleast_1d(np.asarray(lam, dtype=complex))
        out = np.empty(lam_arr.shape, dtype=complex)
        for n, l in enumerate(lam_arr):
            # the kernel contributes |exp(pi Im(lam) s / 2)| growth along s
            drift = 0.5 * math.pi * abs(l.imag) + 1.0
            contour = LineContour.from_decay(eta, decay, tol, drift=drift)

            def integrand(mu, l=l):
                return np.exp(-sign * 1j * math.pi * l * mu / (2 * eta)) * f(-mu)

            out[n] = scale * integrate_line(integrand, contour, tol).value
        return complex(out[0]) if np.ndim(lam) == 0 else out.reshape(np.shape(lam))
    return g


def _u_gaussian(x3: complex, sign: int, scale: complex, strict: bool):
    def gaussian(g: GaussianElem) -> GaussianElem:
        if g.quad == 0:
            raise ZeroQuad("U needs a Gaussian operand with nonzero quadratic coefficient")
        A = g.quad * x3 * x3
        # f(-mu) = c exp(i pi (a mu^2 - 2 b mu)); mu = x3 s
        # exponent i pi A s^2 + 2 pi i B s with B = -b x3 - sign lam/4
        const = scale * x3 * _fresnel(A, strict) * cmath.exp(-1j * math.pi * g.lin**2 / g.quad)
        quad = -1 / (16 * g.quad * x3 * x3)
        lin = -sign * g.lin / (4 * g.quad * x3)
        return GaussianElem(g.coeff * const, quad, lin)
    return gaussian


def op_U(x: BasePoint | Sequence, inverse: bool = False, strict: bool = True) -> LinearOp:
    """U(x): f -> int_{x3 R} exp(-i pi lam mu / 2 x3) f(-mu) dmu, or its inverse."""
    _, _, x3 = _triple(x)
    if x3 == 0:
        raise DegenerateBasePoint("U(x) needs x3 != 0")
    sign, scale = (-1, 1 / (4 * x3)) if inverse else (1, 1.0)
    name = f"U({x3:g})" + ("^-1" if inverse else "")

    def numeric(f, decay, tol):
        return _contour_transform(f, x3, sign, scale, decay, tol)

    return LinearOp(name, numeric, _u_gaussian(x3, sign, scale, strict),
                    inverse=lambda: op_U(x, not inverse, strict))


def invert(op: LinearOp) -> LinearOp:
    """Inverse of an alpha/beta/U factor or of a composition of them."""
    if op.factors:
        out = identity_op()
        for factor in op.factors:
            out = invert(factor) @ out
        return LinearOp(f"({op.name})^-1", out.numeric, out.gaussian, out.factors, lambda: op)
    if op.inverse is None:
        raise TypeError(f"no inverse registered for {op.name}")
    return op.inverse()


# --------------------------------------------------------------------------- generators and words

@dataclass(frozen=True)
class ElemGen:
    i: int
    j: int
    exp: int = 1

    def __post_init__(self):
        if self.i == self.j or not {self.i, self.j} <= {1, 2, 3}:
            raise ValueError(f"e_{{{self.i},{self.j}}} is not an elementary generator")
        if self.exp not in (1, -1):
            raise ValueError("exponent must be +1 or -1")

    @property
    def matrix(self) -> np.ndarray:
        m = np.eye(3, dtype=np.int64)
        m[self.i - 1, self.j - 1] = self.exp
        return m

    def inverse(self) -> "ElemGen":
        return ElemGen(self.i, self.j, -self.exp)

    def __str__(self):
        return f"e{self.i}{self.j}" + ("^-1" if self.exp < 0 else "")


Word = tuple  # ordered tuple of ElemGen


def word(*specs) -> Word:
    """Build a word from strings like ``"e12"`` / ``"e31^-1"`` or ElemGen values."""
    gens = []
    for s in specs:
        if isinstance(s, ElemGen):
            gens.append(s)
            continue
        s = s.strip()
        exp = -1 if s.endswith("^-1") else 1
        core = s[:-3] if exp < 0 else s
        if not (core.startswith("e") and len(core) == 3):
            raise ValueError(f"cannot parse generator {s!r}")
        gens.append(ElemGen(int(core[1]), int(core[2]), exp))
    return tuple(gens)


def word_matrix(w: Word) -> np.ndarray:
    m = np.eye(3, dtype=np.int64)
    for g in w:
        m = m @ g.matrix
    return m


def _phi_positive(i: int, j: int, x: BasePoint, strict: bool) -> LinearOp:
    x1, x2, x3 = x.x1, x.x2, x.x3
    try:
        if (i, j) in ((1, 3), (2, 3)):
            return identity_op()
        if (i, j) == (1, 2):
            return op_alpha(x3)
        if (i, j) == (3, 2):
            return op_beta((x1, x2 - x3, x3))
        if (i, j) == (2, 1):
            return op_alpha(x3) @ op_U((x2, x2 - x1, x3), strict=strict) @ op_alpha(x3)
        if (i, j) == (3, 1):
            return (invert(op_beta((x1 - x3, -x3, x2)))
                    @ op_U((x1 - x3, -x3, x2), inverse=True, strict=strict)
                    @ invert(op_beta((x3, x2, x3 - x1))))
    except DegenerateBasePoint as exc:
        raise DegenerateBasePoint(f"phi_{i}{j} at {x}: {exc}") from exc
    raise ValueError(f"no generator e_{i}{j}")


def build_phi(gen: ElemGen, x: BasePoint, strict: bool = True) -> LinearOp:
    """phi_g(x): F(g^{-1} x) -> F(x).  For exp = -1 this is phi_{g^{-1}}(g x)^{-1}."""
    if gen.exp == 1:
        op = _phi_positive(gen.i, gen.j, x, strict)
    else:
        op = invert(_phi_positive(gen.i, gen.j, x.act(gen.inverse().matrix), strict))
    return op.with_name(f"phi[{gen}]")


def path_operator(w: Word, x: BasePoint, strict: bool = True) -> LinearOp:
    """Phi(g w', x) = phi_g(x) o Phi(w', g^{-1} x), mapping F(w^{-1} x) -> F(x)."""
    op = identity_op()
    point = x
    for n, g in enumerate(w):
        try:
            op = op @ build_phi(g, point, strict)
            point = point.act(g.inverse().matrix)
        except DegenerateBasePoint as exc:
            prefix = " ".join(str(h) for h in w[: n + 1])
            raise DegenerateBasePoint(f"prefix [{prefix}] hits a degenerate base point: {exc}") from exc
    return op.with_name(" ".join(str(g) for g in w) or "1")


_MOEBIUS = {
    (1, 3): lambda x, t: (t, 1),
    (2, 3): lambda x, t: (t, 1),
    (1, 2): lambda x, t: (t - 1, 1),
    (3, 2): lambda x, t: (t * x.x3 + x.x1, x.x3 - x.x2),
    (2, 1): lambda x, t: (t, 1 - t),
    (3, 1): lambda x, t: (t * (x.x3 - x.x1), t * x.x2 + x.x3),
}


def moebius_f(i: int, j: int, x: BasePoint, t) -> complex:
    """Fibre map f_{i,j}(x, t) of the SL(3, Z) action on the dual projective line."""
    num, den = _MOEBIUS[(i, j)](x, complex(t))
    if den == 0:
        raise PoleError(f"f_{i}{j}({x}, {t}) is the point at infinity")
    return num / den


@dataclass(frozen=True)
class RelationReport:
    ratio: complex
    max_dev: float
    ratios: tuple


def probe_path(g0: GaussianElem, g1: GaussianElem, steps: int = 48):
    """Straight path of Gaussians from ``g0`` to ``g1`` (endpoints included)."""
    s = np.linspace(0.0, 1.0, steps + 1)
    return [GaussianElem(g0.coeff + u * (g1.coeff - g0.coeff), g0.quad + u * (g1.quad - g0.quad),
                         g0.lin + u * (g1.lin - g0.lin)) for u in s]


def continued_ratios(left: LinearOp, right: LinearOp, probes: Sequence[GaussianElem],
                     steps: int = 48) -> tuple[list, float]:
    """Ratios left/right at each probe, continued along straight paths between probes.

    Outside the convergence region the Fresnel constants are principal-branch
    square roots, so a ratio is only defined up to sign; along a path the
    sign is chosen continuously.  Returns the ratios at the probes and the
    largest mismatch of quadratic/linear coefficients seen on the way.
    """
    ratios = []
    shape_dev = 0.0
    previous = None
    for k, probe in enumerate(probes):
        path = [probe] if k == 0 else probe_path(probes[k - 1], probe, steps)[1:]
        for g in path:
            gl, gr = left.apply_gaussian(g), right.apply_gaussian(g)
            scale = abs(gl.quad) + abs(gr.quad) + abs(gl.lin) + abs(gr.lin)
            shape_dev = max(shape_dev, (abs(gl.quad - gr.quad) + abs(gl.lin - gr.lin)) / scale)
            r = gl.coeff / gr.coeff
            if previous is not None and abs(-r - previous) < abs(r - previous):
                r = -r
            previous = r
        ratios.append(previous)
    return ratios, float(shape_dev)


def verify_relation(lhs: Word, rhs: Word, x: BasePoint,
                    probes: Sequence[GaussianElem], strict: bool = False) -> RelationReport:
    """Apply both words to Gaussian probes and measure projective agreement.

    ``max_dev`` combines the mismatch of the output Gaussians' exponents with
    the spread of the scalar ratio across probes.
    """
    if not np.array_equal(word_matrix(lhs), word_matrix(rhs)):
        raise MatrixMismatch("the two words are different elements of SL(3, Z)")
    if len(probes) < 2:
        raise ValueError("at least two probes are needed to test projectivity")
    left, right = path_operator(lhs, x, strict), path_operator(rhs, x, strict)
    ratios, shape_dev = continued_ratios(left, right, probes)
    r0 = ratios[0]
    spread = max(abs(r - r0) for r in ratios) / abs(r0)
    return RelationReport(r0, max(shape_dev, float(spread)), tuple(ratios))


def commuting_relations():
    """All pairs (e_ij, e_kl) with i != l, j != k, as (lhs, rhs) words."""
    gens = [ElemGen(i, j) for i, j in permutations((1, 2, 3), 2)]
    out = []
    for a in gens:
        for b in gens:
            if (a.i, a.j) < (b.i, b.j) and a.i != b.j and a.j != b.i:
                out.append(((a, b), (b, a)))
    return out


def braid_relation(i: int, j: int, k: int):
    """e_ij e_jk = e_ik e_jk e_ij."""
    return (ElemGen(i, j), ElemGen(j, k)), (ElemGen(i, k), ElemGen(j, k), ElemGen(i, j))


def torsion_relation():
    """(e13 e31^-1 e13)^4 = 1, with the right side written e13 e13^-1."""
    block = word("e13", "e31^-1", "e13")
    return block * 4, word("e13", "e13^-1")


# --------------------------------------------------------------------------- Fourier identities

@dataclass(frozen=True)
class FourierReport:
    ratio: complex
    dev: float
    quad_dev: float


def fourier_sides(kind: str, x: BasePoint, strict: bool = True) -> tuple[LinearOp, LinearOp]:
    x1, x2, x3 = x.x1, x.x2, x.x3
    if kind == "qheat":
        a = op_alpha(x3)
        lhs = (a @ op_U((x1, x1 + x2, x3), strict=strict) @ a
               @ op_U((x1 + x2, x2, x3), strict=strict) @ a)
        rhs = op_U((x1, x2, x3), strict=strict)
    elif kind == "modular":
        lhs = (op_U((x3, x2, -x1), strict=strict) @ op_beta((-x3, x2, x1))
               @ op_U((x1, -x3, x2), strict=strict))
        rhs = (op_beta((x2, x3, x1)) @ op_U((x1, x2, x3), strict=strict)
               @ op_beta((x1, x2, x3)))
    else:
        raise ValueError(f"unknown Fourier identity {kind!r}")
    return lhs, rhs


def fourier_identity_residual(kind: str, x: BasePoint, probe: GaussianElem,
                              second_probe: GaussianElem | None = None,
                              strict: bool = False) -> FourierReport:
    """Projective check of the q-heat or modular equation of the Fourier transform.

    Both sides act on ``probe`` and on a second probe; ``dev`` is the relative
    change of the scalar ratio between them and ``quad_dev`` the mismatch of
    the output exponents.  With ``strict`` every contour must converge.
    """
    lhs, rhs = fourier_sides(kind, x, strict)
    if second_probe is None:
        second_probe = GaussianElem(0.7 * probe.coeff, probe.quad * (1 + 0.05j), probe.lin)
    ratios, quad_dev = continued_ratios(lhs, rhs, [probe, second_probe])
    return FourierReport(ratios[0], float(abs(ratios[1] - ratios[0]) / abs(ratios[0])), quad_dev)


# --------------------------------------------------------------------------- translation operator

def translation_free(tau, p, eta) -> LinearOp:
    """T = alpha U alpha with prefactor i / sqrt(4 i eta), integrating over eta R.

    Numerically the line is translated to pass through the saddle ``mu = -lam``;
    for entire operands this does not change the integral.
    """
    eta = complex(eta)
    if not eta.imag < 0:
        raise FresnelDivergence(f"the Gaussian kernel needs Im(eta) < 0, got eta = {eta}")
    pref = 1j / power_principal(4j * eta, 0.5)
    inner = op_alpha(eta) @ op_U((0, 0, eta)) @ op_alpha(eta)
    # on mu = -lam + eta s the kernel is exp(-i pi eta s^2 / 4)
    kernel_rate = -math.pi * eta.imag / 4

    def numeric(f, decay, tol):
        def g(lam):
            lam_arr = np.atleast_1d(np.asarray(lam, dtype=complex))
            out = np.empty(lam_arr.shape, dtype=complex)
            for n, l in enumerate(lam_arr):
                contour = LineContour.from_decay(eta, kernel_rate + decay, tol,
                                                 center=-l, drift=1.0)

                def integrand(mu, l=l):
                    return np.exp(-1j * math.pi * (l + mu) ** 2 / (4 * eta)) * f(-mu)

                out[n] = pref * integrate_line(integrand, contour, tol).value
            return complex(out[0]) if np.ndim(lam) == 0 else out.reshape(np.shape(lam))
        return g

    def gaussian(g):
        out = inner.apply_gaussian(g)
        return GaussianElem(out.coeff * pref, out.quad, out.lin)

    return LinearOp(f"T_free(eta={eta:g})", numeric, gaussian)


def theta_block_residual(j: int, kappa: int, lam, tau, eta, tol: Tolerance = DEFAULT_TOL) -> float:
    """Relative residual of theta_{j,k}(lam, tau) = T[theta_{j,k}(., tau - 2 eta k)](lam)."""
    from .theta import ThetaIndex, theta_level

    if kappa < 2:
        raise DomainError("the level must be at least 2")
    eta, tau = complex(eta), complex(tau)
    shifted = tau - 2 * eta * kappa
    T = translation_free(tau, -2 * kappa * eta, eta)
    idx = ThetaIndex(j, kappa)
    rhs = T.apply(lambda mu: theta_level(idx, mu, shifted), theta_growth(kappa, eta, shifted), tol)(lam)
    lhs = theta_level(idx, lam, tau)
    return float(abs(lhs - rhs) / (abs(lhs) + abs(rhs)))


def theta_growth(kappa: int, direction, tau) -> float:
    """Negative Gaussian rate: level-k thetas grow like exp(pi k y^2 / 2 Im tau) in y = Im lam."""
    return -math.pi * kappa * complex(direction).imag ** 2 / (2 * complex(tau).imag)


def free_kernel(lam, mu, eta) -> GaussianElem:
    """u(., mu) = exp(-i pi lam mu / 2 eta) as a Gaussian in lam (zero quadratic part)."""
    return GaussianElem(1.0, 0j, -complex(mu) / (4 * complex(eta)))


def true_solution_phase(mu, tau, p, eta, sign: int = -1) -> complex:
    """exp(sign i pi mu^2 tau / 4 eta p), turning the projective solution u into a flat section.

    Only ``sign = -1`` is consistent with ``u = exp(-i pi mu^2 / 4 eta) T u``;
    ``sign = +1`` is kept to exhibit the failure of the opposite convention.
    """
    return cmath.exp(sign * 1j * math.pi * mu**2 * tau / (4 * eta * p))


def projective_residual_free(lam, mu, tau, p, eta, true_solution: bool = False,
                             sign: int = -1) -> float:
    """Residual of u = exp(-i pi mu^2 / 4 eta) T u, or of v = T v for the true solution.

    Evaluated through the exact Gaussian action of T.
    """
    lam, mu, tau, p, eta = (complex(v) for v in (lam, mu, tau, p, eta))
    T = translation_free(tau, p, eta)
    u = free_kernel(lam, mu, eta)
    if true_solution:
        def v(tau_):
            return GaussianElem(true_solution_phase(mu, tau_, p, eta, sign), 0j, u.lin)
        lhs = v(tau)(lam)
        rhs = T.apply_gaussian(v(tau + p))(lam)
    else:
        lhs = u(lam)
        rhs = cmath.exp(-1j * math.pi * mu**2 / (4 * eta)) * T.apply_gaussian(u)(lam)
    return float(abs(lhs - rhs) / (abs(lhs) + abs(rhs)))
