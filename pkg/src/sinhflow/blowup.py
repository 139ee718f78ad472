"""Concentration diagnostics along a trajectory.

Normalized components ``u1 = u - log int h1 e^u`` and
``u2 = -u - log int h2 e^-u`` have unit weighted mass, so ``8 pi h1 e^u1``
and ``rho2 h2 e^u2`` are measures of total mass ``8 pi`` and ``rho2``.  A
single-point blow-up shows up as ``c1 = max u1`` growing, the scale
``r1 = e^(-c1/2)`` shrinking, and almost all of the first measure sitting in
a small ball around the maximum point ``x1``.
"""

from dataclasses import dataclass, field

import numpy as np

from .energy import EIGHT_PI, log_masses
from .flow import flow_velocity
from .green import green_function
from .torus import Grid, check_field, solve_poisson

SINGLE_POINT = "SINGLE-POINT-CONCENTRATION"
NEVER_S = "NEVER-S-VIOLATION"
EXHAUSTED = "RESOLUTION-EXHAUSTED"
EXHAUSTION_CELLS = 4


@dataclass(frozen=True)
class NormalizedPair:
    u1: np.ndarray
    u2: np.ndarray
    f: np.ndarray


def normalize(u, cfg, du_dt=None):
    """Normalized pair; ``f = du/dt e^(u/2)`` uses ``du_dt`` if given, else
    the continuous flow velocity at ``u``."""
    u = check_field(u)
    a, b = log_masses(u, cfg)
    if du_dt is None:
        du_dt = flow_velocity(u, cfg)
    return NormalizedPair(u1=u - a, u2=-u - b, f=du_dt * np.exp(0.5 * u))


def ball_fraction(grid, center, delta, supersample=8):
    """Fraction of each grid cell inside the periodic disk ``B_delta(center)``.

    Cells whose centre is within half a diagonal of the boundary circle are
    supersampled on an ``s x s`` sub-lattice; others count as 0 or 1.
    """
    if not 0 < delta < 0.5:
        raise ValueError(f"delta must lie in (0, 1/2), got {delta}")
    h = grid.spacing
    dx, dy = grid.displacement(center)
    d = np.hypot(dx, dy)
    frac = (d <= delta).astype(float)
    edge = np.abs(d - delta) < h * np.sqrt(0.5)
    if np.any(edge):
        off = (np.arange(supersample) + 0.5) / supersample - 0.5
        ox, oy = np.meshgrid(off * h, off * h, indexing="ij")
        ex = dx[edge][:, None] + ox.ravel()[None, :]
        ey = dy[edge][:, None] + oy.ravel()[None, :]
        frac[edge] = np.mean(np.hypot(ex, ey) <= delta, axis=1)
    return frac


def concentration(pair, center, delta, which, cfg, complement=False):
    """``8 pi int_B h1 e^u1`` (which=1) or ``rho2 int_B h2 e^u2`` (which=2)
    over the periodic ball ``B_delta(center)`` (or its complement)."""
    n = pair.u1.shape[0]
    h1, h2 = cfg.weights(n)
    frac = ball_fraction(Grid(n), center, delta)
    if complement:
        frac = 1.0 - frac
    if which == 1:
        return float(EIGHT_PI * np.mean(frac * h1 * np.exp(pair.u1)))
    if which == 2:
        return float(cfg.rho2 * np.mean(frac * h2 * np.exp(pair.u2)))
    raise ValueError(f"which must be 1 or 2, got {which}")


def weak_limit_indicator(u, cfg, x1, delta):
    """RMS over ``delta <= r <= 2 delta`` of ``(u - ubar + w) - G_x1``, where
    ``-lap w = rho2 (h2 e^-u / int h2 e^-u - 1)`` with zero mean."""
    n = u.shape[0]
    grid = Grid(n)
    h2 = cfg.weights(n)[1]
    _, b = log_masses(u, cfg)
    rhs = -cfg.rho2 * (h2 * np.exp(-u - b) - 1.0)
    w = solve_poisson(rhs - rhs.mean())
    gd = green_function(x1, grid)
    r = gd.distance
    ring = (r >= delta) & (r <= 2 * delta)
    diff = (u - u.mean() + w) - gd.continuum()
    return float(np.sqrt(np.mean(diff[ring] ** 2)))


def dissipation_minima(dissipation):
    """Indices of interior local minima of a dissipation series."""
    d = np.asarray(dissipation, dtype=float)
    if len(d) < 3:
        return np.arange(len(d))
    idx = np.flatnonzero((d[1:-1] <= d[:-2]) & (d[1:-1] <= d[2:])) + 1
    return idx


@dataclass
class BlowupReport:
    deltas: list
    resolved_delta: float
    rows: list = field(default_factory=list)
    exhausted: bool = False

    def column(self, name):
        return np.array([r[name] for r in self.rows])

    def flagged(self, flag):
        return [r for r in self.rows if flag in r["flags"]]

    @property
    def flags(self):
        out = set()
        for r in self.rows:
            out.update(r["flags"])
        return out

    def ratio_trend(self, window=3):
        """``r2/r1`` over the SINGLE-POINT window, smoothed by a running mean
        of ``window`` samples; returns (smoothed values, nondecreasing?)."""
        rows = self.flagged(SINGLE_POINT)
        if not rows:
            return np.array([]), False
        ratio = np.array([r["r2"] / r["r1"] for r in rows])
        if len(ratio) >= window:
            ratio = np.convolve(ratio, np.ones(window) / window, mode="valid")
        return ratio, bool(np.all(np.diff(ratio) >= -1e-12 * np.abs(ratio[:-1])))


def track(samples, cfg, deltas, never_s_margin=1.0, with_indicator=True):
    """Diagnostics for samples ``(t, u, du_dt[, ...])``.

    Processing stops at the first sample with ``r1 < 4 h`` (resolution
    exhaustion), which is kept and flagged.
    """
    deltas = sorted(float(d) for d in deltas)
    rep = None
    u2_first = None
    c1_prev = None
    for sample in samples:
        t, u, du_dt = sample[0], sample[1], sample[2]
        n = u.shape[0]
        grid = Grid(n)
        h = grid.spacing
        if rep is None:
            resolved = [d for d in deltas if d >= EXHAUSTION_CELLS * h]
            rep = BlowupReport(deltas=deltas, resolved_delta=resolved[0] if resolved else deltas[-1])
        pair = normalize(u, cfg, du_dt)
        i1 = np.unravel_index(np.argmax(pair.u1), pair.u1.shape)
        i2 = np.unravel_index(np.argmax(pair.u2), pair.u2.shape)
        x1 = (i1[0] / n, i1[1] / n)
        x2 = (i2[0] / n, i2[1] / n)
        c1 = float(pair.u1[i1])
        c2 = float(pair.u2[i2])
        row = dict(t=float(t), x1=x1, c1=c1, r1=float(np.exp(-c1 / 2)),
                   x2=x2, c2=c2, r2=float(np.exp(-c2 / 2)), u2max=c2,
                   mu1=[concentration(pair, x1, d, 1, cfg) for d in deltas], flags=[])
        with np.errstate(divide="ignore"):
            dist = grid.distance(x1)
            row["selection_bound"] = float(np.max(np.where(dist > 0, pair.u1 + 2 * np.log(
                np.where(dist > 0, dist, 1.0)), -np.inf)))
        if u2_first is None:
            u2_first = c2
        mu_res = row["mu1"][deltas.index(rep.resolved_delta)]
        if mu_res >= 0.95 * EIGHT_PI and c1_prev is not None and c1 > c1_prev:
            row["flags"].append(SINGLE_POINT)
            if with_indicator:
                row["indicator"] = weak_limit_indicator(u, cfg, x1, rep.resolved_delta)
        if c2 - u2_first > never_s_margin:
            row["flags"].append(NEVER_S)
        c1_prev = c1
        rep.rows.append(row)
        if row["r1"] < EXHAUSTION_CELLS * h:
            row["flags"].append(EXHAUSTED)
            rep.exhausted = True
            break
    if rep is None:
        rep = BlowupReport(deltas=deltas, resolved_delta=deltas[0] if deltas else np.nan)
    return rep
