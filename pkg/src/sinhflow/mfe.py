"""Singular mean-field equation

    -lap w = rho2 (h2 e^(-G_p) e^w / int h2 e^(-G_p) e^w - 1),   int w = 0,

solved by minimizing ``Jt_p(w) = 1/2 int |grad w|^2 - rho2 log int h2 e^(-G_p) e^w``,
and the scan over p that yields the barrier level

    L* = min_p [Jt_p(w_p) - 4 pi A(p) - 8 pi log h1(p)] - 8 pi log pi - 8 pi.
"""

from dataclasses import dataclass, field
import logging
import warnings

import numpy as np

from .energy import EIGHT_PI, log_mass
from .errors import DomainError, SolverError, ValidationError
from .green import green_function
from .torus import Grid, check_field, dirichlet_energy, inverse_laplacian, laplacian

log = logging.getLogger(__name__)

LEVEL_SHIFT = EIGHT_PI * np.log(np.pi) + EIGHT_PI


def singular_weight(p, h2, green=None):
    """``h2 e^(-G_p)`` on the grid of ``h2``; exactly zero at the node p."""
    h2 = check_field(h2)
    if green is None:
        green = green_function(p, Grid(h2.shape[0]))
    return h2 * green.exp_minus_g()


def _log_weight_mass(w, weight):
    return log_mass(weight, w, "int h2 e^-G e^w")


def tilde_j(w, p, cfg, weight=None):
    """``Jt_p(w)``; ``weight`` may be passed to skip rebuilding ``h2 e^-G_p``."""
    w = check_field(w)
    if abs(float(np.mean(w))) > 1e-10:
        raise ValidationError(f"w must have zero mean, got {np.mean(w):.3e}")
    if weight is None:
        weight = singular_weight(p, cfg.weights(w.shape[0])[1])
    return dirichlet_energy(w) - cfg.rho2 * _log_weight_mass(w, weight)


def mfe_residual_field(w, weight, rho2):
    """``-lap w - rho2 (weight e^w / int weight e^w - 1)``."""
    lm = _log_weight_mass(w, weight)
    return -laplacian(w) - rho2 * (weight * np.exp(w - lm) - 1.0)


@dataclass
class MFESolution:
    p: tuple
    w: np.ndarray
    energy_tilde: float
    residual: float
    iterations: int
    weight_mass: float
    trace: list = field(default_factory=list)
    converged: bool = True


class MFEConvergenceError(SolverError):
    def __init__(self, p, residual, iterations):
        self.p = p
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"mean-field solve at p={p} stalled: residual {residual:.3e} "
                         f"after {iterations} iterations")


def _descend(w, weight, rho2, tol, maxit, p):
    """Gradient descent in the H1 metric with Armijo backtracking.

    The preconditioned direction is ``d = -(-lap)^-1 g`` for the L2 gradient
    ``g``; the directional derivative is ``-int |grad d|^2``.  When the
    predicted decrease falls below the rounding level of ``Jt`` the Armijo
    test is meaningless, and a step is accepted if the residual drops.
    """
    def value(v):
        return dirichlet_energy(v) - rho2 * _log_weight_mass(v, weight)

    e = value(w)
    trace = [e]
    g = mfe_residual_field(w, weight, rho2)
    res = float(np.sqrt(np.mean(g * g)))
    it = 0
    while res > tol and it < maxit:
        d = inverse_laplacian(g)          # = -(-lap)^-1 g
        slope = -2.0 * dirichlet_energy(d)
        s = 1.0
        while True:
            cand = w + s * d
            cand -= cand.mean()
            ec = value(cand)
            gc = mfe_residual_field(cand, weight, rho2)
            rc = float(np.sqrt(np.mean(gc * gc)))
            if ec <= e + 1e-4 * s * slope:
                break
            if abs(s * slope) < 1e-13 * max(1.0, abs(e)) and rc < res:
                break
            s *= 0.5
            if s < 1e-12:
                raise MFEConvergenceError(p, res, it)
        w, e, g, res = cand, ec, gc, rc
        trace.append(e)
        it += 1
    return w, e, res, it, trace


def _multistart_guesses(grid, p):
    """Four mean-zero bubbles at quarter-lattice offsets from p."""
    out = []
    for ox, oy in ((0.25, 0.25), (0.75, 0.25), (0.25, 0.75), (0.75, 0.75)):
        r2 = grid.distance((p[0] + ox, p[1] + oy)) ** 2
        b = -np.log(r2 + 0.01)
        out.append(b - b.mean())
    return out


def solve_mfe(p, cfg, n=128, multistart=False, maxit=2000, w0=None, green=None):
    """Minimize ``Jt_p`` from ``w = 0`` (plus optional multi-start)."""
    grid = Grid(n)
    if green is None:
        green = green_function(p, grid)
    p = green.p
    h2 = cfg.weights(n)[1]
    weight = singular_weight(p, h2, green)
    if not np.any(weight > 0):
        raise DomainError("int h2 e^-G_p", 0.0)
    starts = [np.zeros((n, n)) if w0 is None else check_field(w0) - np.mean(w0)]
    if multistart:
        starts += _multistart_guesses(grid, p)
    best = None
    last_error = None
    for start in starts:
        try:
            w, e, res, it, trace = _descend(start, weight, cfg.rho2, cfg.tol_mfe, maxit, p)
        except MFEConvergenceError as exc:
            last_error = exc
            continue
        if res > cfg.tol_mfe:
            last_error = MFEConvergenceError(p, res, it)
            continue
        if best is None or e < best.energy_tilde:
            best = MFESolution(p=p, w=w, energy_tilde=e, residual=res, iterations=it,
                               weight_mass=float(np.exp(_log_weight_mass(w, weight))),
                               trace=trace)
    if best is None:
        raise last_error
    return best


@dataclass
class BarrierScan:
    p_resolution: int
    n: int
    rows: list
    p0: tuple
    level: float
    failed: list = field(default_factory=list)
    solutions: dict = field(default_factory=dict, repr=False)

    @property
    def min_score(self):
        return self.level + LEVEL_SHIFT

    def scores(self):
        return np.array([r[5] for r in self.rows])

    def solution(self, p):
        return self.solutions[tuple(p)]


def barrier_level(cfg, p_resolution, n=128, multistart=False, refine=False, keep_solutions=True):
    """Scan ``p`` over a ``p_resolution^2`` sub-lattice of grid nodes.

    Rows are ``(px, py, A, Jt, h1(p), score)``; nodes with ``h1(p) = 0`` get
    score ``+inf`` and no solve.  With ``refine`` the 3x3 block of nodes at
    half the lattice spacing around the best p is scanned as well.
    """
    if p_resolution < 4:
        raise ValidationError(f"p_resolution must be >= 4, got {p_resolution}")
    grid = Grid(n)
    if n % p_resolution:
        raise ValidationError(f"p_resolution {p_resolution} must divide n = {n}")
    h1 = cfg.weights(n)[0]
    stride = n // p_resolution
    nodes = [(i * stride, j * stride) for i in range(p_resolution) for j in range(p_resolution)]
    rows, failed, sols = [], [], {}

    def visit(i, j):
        p = (i / n, j / n)
        if any(r[0] == p[0] and r[1] == p[1] for r in rows):
            return
        hp = float(h1[i, j])
        gd = green_function(p, grid)
        if hp <= 0:
            rows.append((p[0], p[1], gd.regular_part, np.nan, hp, np.inf))
            return
        try:
            sol = solve_mfe(p, cfg, n, multistart=multistart, green=gd)
        except (SolverError, DomainError) as exc:
            warnings.warn(f"mean-field solve failed at p={p}: {exc}")
            failed.append(p)
            return
        score = sol.energy_tilde - 4 * np.pi * gd.regular_part - EIGHT_PI * np.log(hp)
        rows.append((p[0], p[1], gd.regular_part, sol.energy_tilde, hp, score))
        if keep_solutions:
            sols[p] = sol

    for i, j in nodes:
        visit(i, j)

    def best():
        finite = [r for r in rows if np.isfinite(r[5])]
        if not finite:
            raise SolverError("barrier scan: no admissible p (all failed or h1(p) = 0)")
        return min(finite, key=lambda r: r[5])

    b = best()
    if refine and stride >= 2:
        half = stride // 2
        ci, cj = int(round(b[0] * n)), int(round(b[1] * n))
        for di in (-half, 0, half):
            for dj in (-half, 0, half):
                visit((ci + di) % n, (cj + dj) % n)
        b = best()
    return BarrierScan(p_resolution=p_resolution, n=n, rows=rows, p0=(b[0], b[1]),
                       level=float(b[5] - LEVEL_SHIFT), failed=failed, solutions=sols)
