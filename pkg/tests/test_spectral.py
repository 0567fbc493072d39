import math

import numpy as np
import pytest

from qkzb import Tolerance
from qkzb.errors import BranchError, DomainError, FitUnstable
from qkzb.flat import translation_free
from qkzb.spectral import (
    HeatSolutionSpec, LameParams, cm_apply, hermite_critical, hermite_eigen, hypergeom_m1,
    kzb_residual, modular_map_classical, semiclassical_order, shift_map,
)
from qkzb.theta import rho

HYPER_TOL = Tolerance(1e-12, 1e-12)
GRID = np.linspace(0.15, 0.45, 9) + 0.05j


def test_heat_solution_solves_free_equation():
    g = HeatSolutionSpec(0.7, 4.0)
    assert kzb_residual(g, 0.3, 1j, 4.0, 0) < 1e-7
    assert kzb_residual(g, 0.3, 1j, 3.0, 0) > 1e-2


def test_heat_solution_validation():
    with pytest.raises(ValueError):
        HeatSolutionSpec(0.7, 0)
    with pytest.raises(ValueError):
        LameParams(-1, 1j)
    assert LameParams(2, 1j).coupling == 6


def test_cm_free_particles():
    # v = exp(c (lam1 + lam2)) has sum of second derivatives 2 c^2 v
    v = lambda a, b: np.exp(0.5 * (a + b))
    assert abs(cm_apply(2, 0, v, [0.1, 0.3], 1j) - 0.5 * math.exp(0.2)) < 1e-8
    with pytest.raises(ValueError):
        cm_apply(2, 0, v, [0.1], 1j)


def test_critical_point_at_zero_mu():
    assert abs(hermite_critical(0, 1j) - 0.5) < 1e-11
    assert abs(hermite_critical(0, 0.8j) - 0.5) < 1e-11


@pytest.mark.parametrize("mu", [0.5, 1 + 0.5j, -1.2, 2 + 1j])
@pytest.mark.parametrize("tau", [1j, 0.8j])
def test_hermite_eigenfunction(mu, tau):
    rep = hermite_eigen(mu, tau, GRID)
    assert abs(rho(rep.t0, tau) - mu) < 1e-10 * max(1, abs(mu))
    assert rep.constancy_dev < 1e-6


def test_hermite_wrong_critical_point_is_detected():
    assert hermite_eigen(0.5, 1j, GRID, t0=0.3).constancy_dev > 1e-2


def test_hypergeometric_solves_interacting_equation():
    g = HeatSolutionSpec(0.7, 4.0)
    v = lambda lam, tau: hypergeom_m1(4.0, g, lam, tau, HYPER_TOL)
    assert kzb_residual(v, 0.3, 1j, 4.0, 1) < 1e-4
    # the same function is not a free solution
    assert kzb_residual(v, 0.3, 1j, 4.0, 0) > 1e-3


def test_hypergeometric_shift_direction():
    g = HeatSolutionSpec(0.7, 4.0)
    v = lambda lam, tau: hypergeom_m1(4.0, g, lam, tau, HYPER_TOL, shift_sign=-1)
    assert kzb_residual(v, 0.3, 1j, 4.0, 1) > 1e-2
    # with a constant g both directions agree
    c = HeatSolutionSpec(0.0, 4.0)
    a = hypergeom_m1(4.0, c, 0.3, 1j, HYPER_TOL)
    b = hypergeom_m1(4.0, c, 0.3, 1j, HYPER_TOL, shift_sign=-1)
    assert abs(a - b) < 1e-12 * abs(a)


def test_hypergeometric_vectorized():
    g = HeatSolutionSpec(0.7, 4.0)
    lam = np.array([0.2, 0.3, 0.45])
    vec = hypergeom_m1(4.0, g, lam, 1j, HYPER_TOL)
    for x, y in zip(lam, vec):
        assert abs(hypergeom_m1(4.0, g, x, 1j, HYPER_TOL) - y) < 1e-11 * abs(y)


def test_finite_part_matches_convergent_integral():
    # for kappa < 0 the integral converges; the loop formula must agree with direct quadrature
    from scipy.integrate import quad
    from qkzb.spectral import _hyper_sum
    from qkzb.theta import theta1, theta1_dt0

    kappa, lam, tau = -4.0, 0.3, 1j
    g = HeatSolutionSpec(0.7, kappa)
    th0 = theta1_dt0(tau)

    def h(t):
        return complex((theta1(t, tau) / th0) ** (-2 / kappa) * theta1(lam - t, tau) * th0
                       / (theta1(lam, tau) * theta1(t, tau)) * g(lam + 2 * t / kappa, tau))

    direct = (quad(lambda t: h(t).real, 0, 1, epsabs=1e-13)[0]
              + 1j * quad(lambda t: h(t).imag, 0, 1, epsabs=1e-13)[0])
    loops = _hyper_sum(kappa, g, lam, tau, 16)[0]
    assert abs(loops - direct) < 1e-10 * abs(direct)


def test_hypergeometric_domain():
    g = HeatSolutionSpec(0.7, 4.0)
    with pytest.raises(DomainError):
        hypergeom_m1(2.0, g, 0.3, 1j)
    with pytest.raises(BranchError):
        hypergeom_m1(4.0, g, 0.3, 0.2 + 1j)


@pytest.mark.parametrize("kappa", [1.0, 2.0])
def test_modular_map_preserves_solutions(kappa):
    g = HeatSolutionSpec(0.7, kappa)
    assert kzb_residual(modular_map_classical(g, kappa), 0.3 + 0.1j, 1.2j, kappa, 0) < 1e-6
    wrong = 2.0 if kappa == 1.0 else 1.0
    assert kzb_residual(modular_map_classical(g, wrong), 0.3 + 0.1j, 1.2j, kappa, 0) > 1e-2


def test_shift_map_preserves_solutions():
    g = HeatSolutionSpec(0.7, 2.0)
    assert kzb_residual(shift_map(g), 0.3, 1.2j, 2.0, 0) < 1e-6


def test_semiclassical_nonsolution_is_first_order():
    v = lambda lam, tau: np.exp(lam)
    rep = semiclassical_order(translation_free, v, 0.3, 1j, 4.0, [-0.01j, -0.02j, -0.05j, -0.1j])
    assert abs(rep.slope - 1) < 0.1
    assert rep.coeff_check < 0.05


def test_semiclassical_exact_solution_has_no_defect():
    # the free translation is the exact heat propagator: D is rounding noise and no slope exists
    g = HeatSolutionSpec(0.7, 4.0)
    try:
        rep = semiclassical_order(translation_free, g, 0.3, 1j, 4.0, [-0.01j, -0.02j, -0.05j, -0.1j])
    except FitUnstable:
        return
    assert max(abs(d) for d in rep.deviations) < 1e-12


def test_semiclassical_input_checks():
    v = lambda lam, tau: np.exp(lam)
    with pytest.raises(DomainError):
        semiclassical_order(translation_free, v, 0.3, 1j, 4.0, [-0.01j, -0.02j])
    with pytest.raises(DomainError):
        semiclassical_order(translation_free, v, 0.3, 1j, 4.0, [0.01j, 0.1j])
