import cmath
import math

import numpy as np
import pytest

from qkzb import Tolerance
from qkzb.errors import DomainError, FresnelDivergence, PoleError
from qkzb.interacting import (
    KernelArgs, contour_offset, kernel_grid, kernel_u, projective_sides_one, translation_one,
)

TAU, P, ETA = 0.9j, 1.1j, -0.07j


def test_grid_matches_adaptive_quadrature():
    grid = kernel_grid(TAU, P, ETA)
    for lam, mu in ((0.2, 0.3), (0.1 - 0.05j, -0.25), (0.4 + 0.1j, 0.15 + 0.05j)):
        adaptive = kernel_u(KernelArgs(lam, mu, TAU, P, ETA), Tolerance(1e-13, 1e-13))
        fast = grid(np.array([lam]), np.array([mu]))[0, 0]
        assert abs(fast - adaptive) < 1e-11 * abs(adaptive)


def test_grid_refinement_oracle():
    coarse = kernel_grid(TAU, P, ETA, Tolerance(1e-8, 1e-8))
    fine = kernel_grid(TAU, P, ETA, Tolerance(1e-13, 1e-13))
    lam = np.array([0.0, 0.3, -0.2 + 0.1j])
    a, b = coarse(lam, lam), fine(lam, lam)
    assert np.max(np.abs(a - b)) <= 1e-8 * np.max(np.abs(b))


@pytest.mark.parametrize("lam, mu", [(0.2, 0.3), (0.1 + 0.05j, -0.2)])
def test_lattice_shift_in_lambda(lam, mu):
    # theta(lam + 1 + t) = -theta(lam + t), and the plane-wave factor picks up exp(-i pi mu / 2 eta)
    grid = kernel_grid(TAU, P, ETA)
    u0 = grid(np.array([lam]), np.array([mu]))[0, 0]
    u1 = grid(np.array([lam + 1]), np.array([mu]))[0, 0]
    assert abs(u1 + cmath.exp(-1j * math.pi * mu / (2 * ETA)) * u0) < 1e-11 * abs(u1)


def test_lattice_shift_in_mu():
    grid = kernel_grid(TAU, P, ETA)
    lam, mu = 0.2, 0.3
    u0 = grid(np.array([lam]), np.array([mu]))[0, 0]
    u1 = grid(np.array([lam]), np.array([mu + 1]))[0, 0]
    assert abs(u1 + cmath.exp(-1j * math.pi * lam / (2 * ETA)) * u0) < 1e-11 * abs(u1)


def test_grid_outer_product_shape():
    grid = kernel_grid(TAU, P, ETA)
    out = grid(np.zeros((2, 3)), np.zeros(4))
    assert out.shape == (2, 3, 4)


def test_kernel_domain_checks():
    with pytest.raises(DomainError):
        KernelArgs(0.2, 0.3, TAU, P, 0.07j)
    with pytest.raises(DomainError):
        kernel_grid(TAU, P, 0.07j)
    # theta(t - 2 eta, tau) vanishes at t = 0 when 2 eta = -tau
    with pytest.raises(PoleError):
        KernelArgs(0.2, 0.3, 1j, P, -0.5j)
    with pytest.raises(FresnelDivergence):
        translation_one(TAU, P, 0.07j)


def test_contour_offset_range():
    assert contour_offset(0.5) == -0.5
    assert contour_offset(0.0) == -0.25
    assert contour_offset(3.0) == -0.75


def test_translation_independent_of_contour_offset(monkeypatch):
    # the integrand is entire between the two admissible offsets, so the value cannot move
    import qkzb.interacting as mod

    tol = Tolerance(1e-10, 1e-10)
    values = []
    for offset in (-0.3, -0.6):
        monkeypatch.setattr(mod, "contour_offset", lambda lam, o=offset: o)
        values.append(projective_sides_one(0.2, 0.3, TAU, P, ETA, tol)[1])
    assert abs(values[0] - values[1]) < 1e-8 * abs(values[0])


def test_omega_scale_moves_kernel_linearly():
    grid = kernel_grid(TAU, P, ETA)
    lam, mu = np.array([0.2]), np.array([0.3])
    assert abs(grid(lam, mu, 1.001)[0, 0] - 1.001 * grid(lam, mu)[0, 0]) < 1e-14 * abs(grid(lam, mu)[0, 0])
