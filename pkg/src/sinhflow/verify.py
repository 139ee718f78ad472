"""Quick invariant suite behind ``sinhflow verify``.

Each check returns a :class:`Check` with the measured value and its
threshold; the suite takes a few seconds at n = 128.
"""

from dataclasses import dataclass, replace

import numpy as np

from .energy import FlowConfig, energy_j, euler_lagrange
from .flow import run
from .green import green_function
from .initial import smooth_random
from .mfe import solve_mfe
from .torus import Grid, dirichlet_pairing, integrate, laplacian, solve_poisson


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    threshold: float

    @property
    def passed(self):
        return bool(np.isfinite(self.value) and self.value <= self.threshold)

    def line(self):
        mark = "PASS" if self.passed else "FAIL"
        return f"{mark}  {self.name:<22} {self.value:11.3e}  <= {self.threshold:.1e}"


def _poisson(n, seed):
    f = smooth_random(n, 1.0, seed)
    u = solve_poisson(f)
    return float(np.max(np.abs(laplacian(u) - f)))


def _green_checks(n, seed):
    grid = Grid(n)
    a = green_function((0.5, 0.5), grid)
    b = green_function((0.25, 0.75), grid)
    w = smooth_random(n, 1.0, seed + 1)
    i, j = a.node
    lhs = dirichlet_pairing(a.g_field, w)
    rhs = 8 * np.pi * (w[i, j] - integrate(w))
    r = a.distance
    h = grid.spacing
    ring = (r > 0) & (r <= 2 * h)
    ratio = a.exp_minus_g()[ring] / r[ring] ** 4 / np.exp(-a.regular_part)
    return [
        Check("green_mean", abs(integrate(a.g_field)), 1e-6),
        Check("green_pairing", abs(lhs - rhs) / abs(rhs), 1e-4),
        Check("green_translation", abs(a.regular_part - b.regular_part), 1e-6),
        Check("green_gradient", max(abs(a.b1), abs(a.b2)), 1e-4),
        Check("green_ring", float(np.max(np.abs(ratio - 1))), 1e-2),
    ]


def _energy_checks(n, cfg, seed):
    u = smooth_random(n, 1.0, seed + 2)
    v = smooth_random(n, 1.0, seed + 3)
    j0 = energy_j(u, cfg)
    shift = abs(energy_j(u + 0.7, cfg) - j0) / max(1.0, abs(j0))
    s = 1e-4
    fd = (energy_j(u + s * v, cfg) - energy_j(u - s * v, cfg)) / (2 * s)
    exact = integrate(euler_lagrange(u, cfg) * v)
    return [Check("energy_shift", shift, 1e-12),
            Check("euler_lagrange", abs(fd - exact) / max(abs(exact), 1e-12), 1e-5)]


def _flow_checks(n, cfg, seed):
    cfg = replace(cfg, dt_init=1e-4, dt_max=1e-3)
    u0 = smooth_random(n, 1.0, seed + 4)
    res = run(u0, cfg, t_end=0.02, max_steps=60)
    e = res.record.column("energy")
    rises = np.diff(e)
    tol = cfg.energy_tolerance(e[0])
    return [Check("flow_mass_drift", res.record.mass_drift(), cfg.tol_mass),
            Check("flow_energy_rise", max(0.0, float(rises.max())), tol)]


def _mfe_check(n, cfg):
    sol = solve_mfe((0.5, 0.5), cfg, n)
    return Check("mfe_residual", sol.residual, cfg.tol_mfe)


def run_suite(cfg=None, n=128, seed=0):
    """All checks on ``n``; ``cfg`` defaults to h1 = h2 = 1, rho2 = 4 pi."""
    cfg = FlowConfig() if cfg is None else cfg
    checks = [Check("poisson_residual", _poisson(n, seed), 1e-9)]
    checks += _green_checks(n, seed)
    checks += _energy_checks(n, cfg, seed)
    checks += _flow_checks(n, cfg, seed)
    checks.append(_mfe_check(n, cfg))
    return checks


def format_table(checks):
    lines = [c.line() for c in checks]
    ok = sum(c.passed for c in checks)
    lines.append(f"{ok}/{len(checks)} checks passed")
    return "\n".join(lines)
