import numpy as np
import pytest

import oracles
from sinhflow import Grid, ValidationError, integrate
from sinhflow.green import (ResolutionError, cutoff, expansion_coeffs, green_function,
                            regular_part, ring_fit)
from sinhflow.initial import smooth_random
from sinhflow.torus import dirichlet_pairing, laplacian

# theta-function value, independent of the package
A_EXACT = -5.242131703646037


def test_oracle_constant():
    assert oracles.REGULAR_PART == pytest.approx(A_EXACT, abs=1e-13)


@pytest.mark.parametrize("n, tol", [(128, 1e-8), (256, 1e-10)])
def test_regular_part_against_theta_oracle(n, tol):
    a, err = regular_part((0.0, 0.0), Grid(n))
    assert a == pytest.approx(A_EXACT, abs=tol)
    assert err < 1e-6


def test_continuum_field_against_theta_oracle():
    grid = Grid(128)
    gd = green_function((0.25, 0.5), grid)
    x, y = grid.coords
    exact = oracles.green(x - 0.25, y - 0.5)
    far = gd.distance > 0.05
    assert np.max(np.abs(gd.continuum()[far] - exact[far])) < 1e-10


def test_delta_field_identities():
    grid = Grid(128)
    gd = green_function((0.5, 0.25), grid)
    assert abs(integrate(gd.g_field)) < 1e-14
    lap = laplacian(gd.g_field)
    i, j = gd.node
    expected = np.full((128, 128), 8 * np.pi)
    expected[i, j] -= 8 * np.pi * 128**2
    assert np.allclose(lap, expected, atol=1e-8 * 128**2)


def test_pairing_identity():
    grid = Grid(128)
    gd = green_function((0.3, 0.7), grid)
    w = smooth_random(128, 1.0, 9)
    i, j = gd.node
    rhs = 8 * np.pi * (w[i, j] - integrate(w))
    assert dirichlet_pairing(gd.g_field, w) == pytest.approx(rhs, rel=1e-10)


def test_translation_invariance_and_zero_gradient():
    grid = Grid(128)
    vals = [green_function(p, grid) for p in [(0, 0), (0.5, 0.5), (0.125, 0.875)]]
    a = [g.regular_part for g in vals]
    assert max(a) - min(a) < 1e-12
    for g in vals:
        assert abs(g.b1) < 1e-10 and abs(g.b2) < 1e-10
    assert expansion_coeffs((0.5, 0.5), grid) == pytest.approx((0, 0), abs=1e-10)


def test_ring_limit_of_exp_minus_g():
    grid = Grid(256)
    gd = green_function((0.5, 0.5), grid)
    r = gd.distance
    ring = (r > 0) & (r <= 2 * grid.spacing)
    ratio = gd.exp_minus_g()[ring] / r[ring] ** 4
    assert np.allclose(ratio, np.exp(-A_EXACT), rtol=1e-3)
    assert gd.exp_minus_g()[gd.node] == 0.0


def test_beta_vanishes_quadratically():
    grid = Grid(256)
    gd = green_function((0.0, 0.0), grid)
    r = gd.distance
    beta = gd.beta()
    for k in (4, 8, 16):
        ring = np.abs(r - k * grid.spacing) < 0.5 * grid.spacing
        # the leading term of the remainder is 2 pi r^2 (from the -8 pi background)
        assert np.mean(beta[ring] / r[ring] ** 2) == pytest.approx(2 * np.pi, rel=1e-2)


def test_corrected_mean_converges():
    m128 = abs(green_function((0, 0), Grid(128)).corrected_mean())
    m256 = abs(green_function((0, 0), Grid(256)).corrected_mean())
    assert m256 < m128 / 3


def test_delta_source_fit_is_coarser():
    grid = Grid(256)
    gd = green_function((0, 0), grid, source="delta", max_fit_error=1e-2)
    assert 1e-6 < abs(gd.regular_part - A_EXACT) < 1e-2
    with pytest.raises(ResolutionError):
        green_function((0, 0), grid, source="delta")


def test_cutoff_profile():
    r = np.array([0.0, 0.05, 0.1, 0.25, 0.4, 0.6])
    chi, d1, _ = cutoff(r)
    assert np.allclose(chi[[0, 1, 2]], 1.0) and np.allclose(chi[[4, 5]], 0.0)
    assert 0 < chi[3] < 1 and d1[3] < 0


def test_resolution_errors():
    with pytest.raises(ResolutionError):
        ring_fit(np.zeros((32, 32)), (0, 0), Grid(32))
    with pytest.raises(ValidationError):
        green_function((0, 0), Grid(128), source="lattice")
