import numpy as np
import pytest

import oracles
from sinhflow import FlowConfig, Grid, ValidationError
from sinhflow.green import green_function
from sinhflow.mfe import (LEVEL_SHIFT, MFEConvergenceError, barrier_level, mfe_residual_field,
                          singular_weight, solve_mfe, tilde_j)
from sinhflow.torus import solve_poisson

CFG = FlowConfig()


@pytest.fixture(scope="module")
def sol128():
    return solve_mfe((0.0, 0.0), CFG, 128)


def test_level_shift_constant():
    assert LEVEL_SHIFT == pytest.approx(oracles.LEVEL_SHIFT, rel=1e-15)
    assert LEVEL_SHIFT == pytest.approx(53.90294, abs=1e-5)


def test_residual_certificate(sol128):
    assert sol128.converged and sol128.residual <= CFG.tol_mfe
    weight = singular_weight((0, 0), CFG.weights(128)[1])
    r = mfe_residual_field(sol128.w, weight, CFG.rho2)
    assert np.sqrt(np.mean(r * r)) == pytest.approx(sol128.residual, rel=1e-12)
    assert abs(np.mean(sol128.w)) < 1e-12


def test_energy_trace_is_nonincreasing(sol128):
    tr = np.array(sol128.trace)
    assert np.all(np.diff(tr) <= 1e-13 * np.abs(tr[:-1]))


def test_grid_convergence(sol128):
    fine = solve_mfe((0.0, 0.0), CFG, 256)
    assert fine.energy_tilde == pytest.approx(sol128.energy_tilde, rel=1e-10)


def test_translation_invariance(sol128):
    other = solve_mfe((0.5, 0.25), CFG, 128)
    assert other.energy_tilde == pytest.approx(sol128.energy_tilde, rel=1e-12)
    assert np.allclose(np.roll(sol128.w, (64, 32), axis=(0, 1)), other.w, atol=1e-9)


def test_multistart_finds_the_same_minimum(sol128):
    multi = solve_mfe((0.0, 0.0), CFG, 128, multistart=True)
    assert multi.energy_tilde == pytest.approx(sol128.energy_tilde, rel=1e-12)


def test_small_rho2_matches_linear_response():
    n, rho2 = 64, 1e-3
    cfg = FlowConfig(rho2=rho2)
    sol = solve_mfe((0.5, 0.5), cfg, n)
    weight = singular_weight((0.5, 0.5), cfg.weights(n)[1])
    f = weight / np.mean(weight) - 1.0
    w1 = -solve_poisson(f - f.mean())
    assert np.max(np.abs(sol.w - rho2 * w1)) < 10 * rho2**2 * np.max(np.abs(w1))


def test_tilde_j_requires_mean_zero():
    with pytest.raises(ValidationError):
        tilde_j(np.ones((32, 32)), (0, 0), CFG)


def test_stall_is_reported():
    with pytest.raises(MFEConvergenceError):
        solve_mfe((0.0, 0.0), CFG, 128, maxit=1)


def test_level_against_theta_oracle(sol128):
    scan = barrier_level(CFG, 4, 128)
    expected = sol128.energy_tilde - 4 * np.pi * oracles.REGULAR_PART - oracles.LEVEL_SHIFT
    assert scan.level == pytest.approx(expected, abs=1e-7)
    assert np.ptp(scan.scores()) < 1e-10
    assert len(scan.rows) == 16 and not scan.failed


def test_scan_excludes_zeros_of_h1():
    cfg = FlowConfig(h1="clipped_cosine 0 1 0", h2="gaussian_bump 0.5 0.5 0.2 0.1")
    scan = barrier_level(cfg, 4, 128)
    h1 = cfg.weights(128)[0]
    for px, py, _, jt, hp, score in scan.rows:
        i, j = Grid(128).node((px, py))
        assert hp == h1[i, j]
        if hp <= 0:
            assert score == np.inf and np.isnan(jt)
            assert (px, py) not in scan.solutions
        else:
            assert np.isfinite(score)
    assert cfg.weights(128)[0][Grid(128).node(scan.p0)] > 0
    assert any(r[4] <= 0 for r in scan.rows)


def test_scan_validation():
    with pytest.raises(ValidationError):
        barrier_level(CFG, 2, 128)
    with pytest.raises(ValidationError):
        barrier_level(CFG, 6, 128)


def test_singular_weight_vanishes_at_p():
    gd = green_function((0.25, 0.25), Grid(128))
    wt = singular_weight(gd.p, CFG.weights(128)[1], gd)
    assert wt[gd.node] == 0 and np.all(wt >= 0)
