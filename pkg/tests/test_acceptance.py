"""Acceptance suite: one test per criterion, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v``; a pass/fail line per
criterion is printed in the terminal summary.  ``python tests/test_acceptance.py``
runs the same checks without pytest.
"""

import time
from dataclasses import replace

import numpy as np
import pytest

import oracles
from sinhflow import FlowConfig, Grid, energy_j, euler_lagrange, integrate
from sinhflow.barrier import (TestFunctionParams, alpha_of, build_test_function,
                              condition_check, expansion_fit)
from sinhflow.blowup import EXHAUSTED, EXHAUSTION_CELLS, NEVER_S, SINGLE_POINT, normalize, track
from sinhflow.flow import convergence_certificate, run
from sinhflow.green import green_function
from sinhflow.initial import smooth_random
from sinhflow.mfe import barrier_level, solve_mfe
from sinhflow.torus import dirichlet_pairing

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script
    ACCEPTANCE_LINES = {}

N = 128
UNIT = FlowConfig()
# non-negative weights with a genuine zero set for criterion 9
ZERO_SET = FlowConfig(h1="clipped_cosine a=0.5 b=1 c=0",
                      h2="gaussian_bump cx=0.25 cy=0.5 sigma=0.15 floor=0.05")


def report(k, ok, detail):
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[k] = line
    print(line, flush=True)
    return ok


# criteria 1, 2 and 9 ---------------------------------------------------------

def long_run(cfg):
    """10^4 fixed steps of dt = 1e-5 from a two-mode initial field, n = 128."""
    dt = 1e-5
    cfg = replace(cfg, dt_init=dt, dt_max=dt, t_end=1.0)
    x, y = Grid(N).coords
    u0 = np.cos(2 * np.pi * x) + 0.5 * np.sin(2 * np.pi * y)
    start = time.monotonic()
    res = run(u0, cfg, max_steps=10_000, sample_every=1)
    return cfg, res, time.monotonic() - start


def mass_and_energy(cfg, res, seconds):
    rec = res.record
    drift = rec.mass_drift()
    e = rec.column("energy")
    rise = float(np.max(np.diff(e)))
    tol = cfg.energy_tolerance(e[0])
    drop, quad = rec.energy_identity()
    mismatch = abs(drop - quad) / drop
    return dict(steps=res.state.step_count, drift=drift, seconds=seconds, rise=rise, tol=tol,
                drop=drop, quad=quad, mismatch=mismatch, rejections=rec.rejections,
                bounds=rec.bounds)


@pytest.fixture(scope="module")
def unit_run():
    return mass_and_energy(*long_run(UNIT))


@pytest.fixture(scope="module")
def zero_set_run():
    return mass_and_energy(*long_run(ZERO_SET))


def check_mass(m):
    return m["steps"] == 10_000 and m["drift"] <= 1e-6 and m["seconds"] <= 120


def check_energy(m):
    return m["rise"] <= m["tol"] and m["mismatch"] <= 1e-3


def test_criterion_1_mass_conservation(unit_run):
    m = unit_run
    ok = report(1, check_mass(m), f"{m['steps']} steps, relative drift {m['drift']:.2e} "
                f"(<= 1e-6), runtime {m['seconds']:.0f} s (<= 120 s)")
    assert ok


def test_criterion_2_energy_monotone(unit_run):
    m = unit_run
    ok = report(2, check_energy(m), f"max step change {m['rise']:.2e} (tol {m['tol']:.1e}), "
                f"rejections {m['rejections']}, decrease {m['drop']:.6f} vs dissipation "
                f"integral {m['quad']:.6f}, relative mismatch {m['mismatch']:.2e} (<= 1e-3)")
    assert ok


# criterion 3 ------------------------------------------------------------------

def test_criterion_3_euler_lagrange():
    cfg = FlowConfig(h1="cosine_family 0.4 -0.3", h2="gaussian_bump 0.3 0.6 0.15 0.2")
    errs = []
    for k in range(20):
        u = smooth_random(N, 2.0, 1000 + k)
        v = smooth_random(N, 1.0, 2000 + k)
        s = 1e-4
        fd = (energy_j(u + s * v, cfg) - energy_j(u - s * v, cfg)) / (2 * s)
        exact = integrate(euler_lagrange(u, cfg) * v)
        errs.append(abs(fd - exact) / abs(exact))
    worst = max(errs)
    ok = report(3, worst <= 1e-5, f"20 pairs, worst relative error {worst:.2e} (<= 1e-5)")
    assert ok


# criterion 4 ------------------------------------------------------------------

def test_criterion_4_green_suite():
    grid = Grid(N)
    stride = N // 4
    pts = [(i * stride / N, j * stride / N) for i in range(4) for j in range(4)]
    data = [green_function(p, grid) for p in pts]
    mean = max(abs(integrate(g.g_field)) for g in data)
    a = np.array([g.regular_part for g in data])
    spread = float(np.ptp(a))
    b = max(max(abs(g.b1), abs(g.b2)) for g in data)
    w = smooth_random(N, 1.0, 42)
    pairing = 0.0
    ring = 0.0
    for g in data:
        i, j = g.node
        rhs = 8 * np.pi * (w[i, j] - integrate(w))
        pairing = max(pairing, abs(dirichlet_pairing(g.g_field, w) - rhs) / abs(rhs))
        r = g.distance
        inner = np.abs(r - grid.spacing) < 1e-12
        ratio = g.exp_minus_g()[inner] / r[inner] ** 4 / np.exp(-g.regular_part)
        ring = max(ring, float(np.max(np.abs(ratio - 1))))
    oracle = abs(a[0] - oracles.REGULAR_PART)
    ok = mean <= 1e-6 and spread <= 1e-6 and b <= 1e-4 and pairing <= 1e-4 and ring <= 1e-2
    report(4, ok, f"|int G| {mean:.1e}, A spread {spread:.1e}, |b| {b:.1e}, pairing "
           f"{pairing:.1e}, ring {ring:.1e}; A = {a[0]:.10f} (theta oracle off by {oracle:.1e})")
    assert ok


# criteria 5 and 9 -----------------------------------------------------------

def mfe_suite(cfg):
    scan = barrier_level(cfg, 4, N)
    sols = list(scan.solutions.values())
    worst = max(s.residual for s in sols)
    coarse = scan.solution(scan.p0).energy_tilde
    fine = solve_mfe(scan.p0, cfg, 2 * N).energy_tilde
    rel = abs(fine - coarse) / abs(coarse)
    tiny = solve_mfe(scan.p0, replace(cfg, rho2=1e-6), N)
    wmax = float(np.max(np.abs(tiny.w)))
    ok = (not scan.failed and worst <= 1e-8 and rel <= 1e-4 and wmax <= 1e-4)
    return ok, scan, (f"{len(sols)} solves, worst residual {worst:.1e} (<= 1e-8), "
                      f"Jt 128 vs 256 rel {rel:.1e} (<= 1e-4), max|w| at rho2=1e-6 {wmax:.1e}")


def test_criterion_5_mfe():
    ok, scan, detail = mfe_suite(UNIT)
    report(5, ok, detail + f", L* = {scan.level:.8f}")
    assert ok


# criterion 6 ------------------------------------------------------------------

# every admissible epsilon (alpha sqrt(eps) < 1/8) in [3e-6, 1e-3] on a log-ish ladder
EPS_LADDER = [4.8e-4, 4e-4, 3e-4, 2e-4, 1e-4, 3e-5, 1e-5, 3e-6]


def test_criterion_6_barrier():
    scan = barrier_level(UNIT, 4, N)
    assert all(alpha_of(e) * np.sqrt(e) < 1 / 8 for e in EPS_LADDER)
    fit = expansion_fit(EPS_LADDER, UNIT, scan)
    negative = bool(np.all(fit.gaps < 0))
    rel = fit.c1_relative_error
    ok = negative and rel <= 0.15
    gaps = ", ".join(f"{e:.1e}:{g:+.4f}" for e, g in zip(fit.eps, fit.gaps))
    report(6, ok, f"condition {condition_check(scan.p0, UNIT):.4f}; gaps {gaps}; c1 fit "
           f"{fit.c1:.2f} vs predicted {fit.c1_predicted:.2f} (rel {rel:.2f}, <= 0.15); "
           f"c0 - L* = {fit.c0 - fit.level:+.4f}")
    assert ok


# criterion 7 ------------------------------------------------------------------

def test_criterion_7_flow_from_test_function():
    eps = 1.5e-4
    cfg = replace(UNIT, dt_init=1e-6, dt_max=100.0, t_end=1e6)
    grid = Grid(N)
    scan = barrier_level(cfg, 4, N)
    gd = green_function(scan.p0, grid)
    params = TestFunctionParams.from_green(eps, gd)
    params.check_resolution(N, core=False)
    u0 = build_test_function(params, scan.solution(scan.p0).w, N, gd)
    gap0 = energy_j(u0, cfg) - scan.level
    start = time.monotonic()
    res = run(u0, cfg, sample_every=5, stop_residual=1e-9, stop_dissipation=1e-12, max_wall=600)
    seconds = time.monotonic() - start
    cert = convergence_certificate(res.state, cfg, res.record)
    e = res.record.column("energy")
    below = bool(np.all(e < scan.level))
    ok = (gap0 < 0 and cert.verdict == "CONVERGED" and cert.residual <= 1e-6
          and cert.dissipation <= 1e-8 and below and seconds <= 600)
    report(7, ok, f"eps {eps:g}, initial gap {gap0:+.4f}; {cert}; max J - L* "
           f"{e.max() - scan.level:+.4f}; {res.state.step_count} steps, {seconds:.0f} s (<= 600 s)")
    assert ok


# criterion 8 ------------------------------------------------------------------

def test_criterion_8_concentration():
    n = N
    cfg = FlowConfig(rho2=4 * np.pi, h1="cosine_family 0.5 0.5", dt_init=1e-6, dt_max=1.0,
                     t_end=1e6)
    x0 = (0.0, 0.0)
    u0 = -2 * np.log(Grid(n).distance(x0) ** 2 + 1e-2)
    limit = EXHAUSTION_CELLS / n

    def exhausted(state):
        c1 = normalize(state.u, cfg, state.du_dt).u1.max()
        return "resolution-exhausted" if np.exp(-c1 / 2) < limit else None

    res = run(u0, cfg, sample_every=20, keep_fields=True, stop=exhausted)
    rep = track(res.record.snapshots, cfg, [0.05, 0.1, 0.2])
    flagged = [r for r in rep.flagged(SINGLE_POINT) if EXHAUSTED not in r["flags"]]
    u2 = rep.column("u2max")
    _, nondecreasing = rep.ratio_trend()
    cert = convergence_certificate(res.state, cfg, res.record)
    ok = (rep.exhausted and bool(flagged) and NEVER_S not in rep.flags and nondecreasing)
    mu = max(r["mu1"][rep.deltas.index(rep.resolved_delta)] for r in flagged) if flagged else 0.0
    report(8, ok, f"condition {condition_check(x0, cfg, n):.2f}; {len(flagged)} flagged samples "
           f"before exhaustion at t = {rep.rows[-1]['t']:.0f}, max mu1(B_{rep.resolved_delta}) "
           f"{mu:.3f} (>= {0.95 * 8 * np.pi:.3f}); u2max in [{u2.min():.2f}, {u2.max():.2f}]; "
           f"r2/r1 nondecreasing {nondecreasing}; certificate {cert.verdict}")
    assert ok


# criterion 9 ------------------------------------------------------------------

def test_criterion_9_nonnegative_weights(zero_set_run):
    m = zero_set_run
    ok_flow = check_mass(m) and check_energy(m)
    ok_mfe, scan, detail = mfe_suite(ZERO_SET)
    h1 = ZERO_SET.weights(N)[0]
    zero_rows = [r for r in scan.rows if r[4] <= 0]
    excluded = all(np.isinf(r[5]) and (r[0], r[1]) not in scan.solutions for r in zero_rows)
    p0_ok = h1[Grid(N).node(scan.p0)] > 0
    ok = ok_flow and ok_mfe and bool(zero_rows) and excluded and p0_ok
    lo1, hi1 = m["bounds"]["mass_h1"]
    report(9, ok, f"flow: drift {m['drift']:.1e}, max step change {m['rise']:.1e}, identity "
           f"mismatch {m['mismatch']:.1e}, {m['seconds']:.0f} s, int h1 e^u in [{lo1:.3f}, "
           f"{hi1:.3f}]; mfe: {detail}; {len(zero_rows)} zero-h1 nodes excluded {excluded}, "
           f"h1(p0) > 0 {p0_ok}")
    assert ok


if __name__ == "__main__":
    import sys

    results = []
    for name, fn in sorted(globals().items()):
        if not name.startswith("test_criterion_"):
            continue
        args = []
        if "unit_run" in fn.__code__.co_varnames[:fn.__code__.co_argcount]:
            args = [globals().setdefault("_unit", mass_and_energy(*long_run(UNIT)))]
        if "zero_set_run" in fn.__code__.co_varnames[:fn.__code__.co_argcount]:
            args = [mass_and_energy(*long_run(ZERO_SET))]
        try:
            fn(*args)
            results.append(True)
        except AssertionError:
            results.append(False)
    sys.exit(0 if all(results) else 1)
