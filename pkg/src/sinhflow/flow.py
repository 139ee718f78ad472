"""Semi-implicit time stepping of the flow

    e^u du/dt = lap u + rho1 (h1 e^u / int h1 e^u - 1) - rho2 (h2 e^-u / int h2 e^-u - 1)

with mass conservation, energy-decrease acceptance and adaptive dt.

Each step freezes the mass coefficient ``m = e^u`` and solves

    (m/dt - lap) delta = lap u + N(u)

for the increment ``delta = u_new - u`` by preconditioned CG.  This is the
same linear system as ``(m/dt - lap) u_new = m u/dt + N(u)``; solving for the
increment keeps the relative CG tolerance meaningful as the right side
decays near equilibrium.  Afterwards a constant is added so that
``int e^u`` equals its value before the step; the energy and the nonlocal
terms are invariant under constant shifts, so this is a projection onto the
conserved level set rather than a change of dynamics.
"""

from dataclasses import dataclass, field
import logging
import time

import numpy as np
import scipy.sparse as sp

from .energy import energy_j, log_mass, log_masses, nonlocal_terms
from .errors import SolverError
from .torus import check_field, laplacian, workspace

log = logging.getLogger(__name__)

CSV_COLUMNS = ("t", "energy", "mass_eu", "mass_h1", "mass_h2",
               "umax", "umin", "dissipation", "residual")


class StepFailure(SolverError):
    """Inner linear solve did not converge."""

    def __init__(self, residual, iterations):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"PCG stalled at relative residual {residual:.3e} "
                         f"after {iterations} iterations")


@dataclass(frozen=True)
class FlowState:
    u: np.ndarray
    t: float
    mass_e_u: float
    mass_h1: float
    mass_h2: float
    energy: float
    step_count: int = 0
    du_dt: np.ndarray = None
    force: np.ndarray = None

    @classmethod
    def initial(cls, u, cfg, t=0.0):
        u = check_field(u)
        return _make_state(u, cfg, t, 0, None)


def _make_state(u, cfg, t, step_count, du_dt):
    logs = log_masses(u, cfg)
    one = np.ones_like(u)
    # lap u + N(u) is reused by the diagnostics and the next step
    force = laplacian(u) + nonlocal_terms(u, cfg, logs)
    return FlowState(u=u, t=float(t), mass_e_u=float(np.exp(log_mass(one, u))),
                     mass_h1=float(np.exp(logs[0])), mass_h2=float(np.exp(logs[1])),
                     energy=energy_j(u, cfg, logs), step_count=step_count, du_dt=du_dt,
                     force=force)


def flow_velocity(u, cfg):
    """``du/dt`` of the continuous flow at ``u``: ``e^-u (lap u + N(u))``."""
    return np.exp(-u) * (laplacian(u) + nonlocal_terms(u, cfg))


def diagnostics(u, cfg, force=None):
    """(dissipation, residual) with dissipation = int |du/dt|^2 e^u."""
    g = laplacian(u) + nonlocal_terms(u, cfg) if force is None else force
    return float(np.mean(g * g * np.exp(-u))), float(np.sqrt(np.mean(g * g)))


def pcg(apply_a, b, apply_m, tol=1e-10, maxit=1000, x0=None):
    """Preconditioned CG for SPD ``apply_a``; returns (x, iterations).

    The stopping test is relative to ``|b|`` whatever the start ``x0``.
    """
    nb = np.linalg.norm(b)
    if nb == 0:
        return np.zeros_like(b), 0
    if x0 is None:
        x = np.zeros_like(b)
        r = b.copy()
    else:
        x = x0.copy()
        r = b - apply_a(x)
    z = apply_m(r)
    p = z.copy()
    rz = np.vdot(r, z)
    for it in range(maxit):
        if np.linalg.norm(r) <= tol * nb:
            return x, it
        ap = apply_a(p)
        alpha = rz / np.vdot(p, ap)
        x += alpha * p
        r -= alpha * ap
        z = apply_m(r)
        rz_new = np.vdot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    res = np.linalg.norm(r) / nb
    if res <= tol:
        return x, maxit
    raise StepFailure(res, maxit)


# blend point of the diagonal scaling: the |k| = 4 Laplacian eigenvalue
SCALING_KAPPA = 16 * (2 * np.pi) ** 2


def _spectral_preconditioner(m, dt, scaled=True):
    """Constant-coefficient inverse ``(mbar/dt - lap)^-1``, optionally wrapped
    in the symmetric diagonal scaling ``s = sqrt((mbar/dt + k)/(m/dt + k))``.

    The scaling makes the preconditioner exact for the mass term at small dt
    and tends to 1 as dt grows, recovering the plain inverse.
    """
    ws = workspace(m.shape[0])
    mbar = float(np.mean(m))
    mult = 1.0 / (mbar / dt - ws.symbol)
    if not scaled:
        return lambda r: ws.apply(r, mult)
    s = np.sqrt((mbar / dt + SCALING_KAPPA) / (m / dt + SCALING_KAPPA))
    return lambda r: s * ws.apply(s * r, mult)


def _fd_laplacian(n):
    e = np.ones(n)
    d = sp.diags([e[:-1], -2 * e, e[:-1]], [-1, 0, 1], format="lil")
    d[0, n - 1] = 1.0
    d[n - 1, 0] = 1.0
    d = sp.csr_matrix(d) * float(n * n)
    eye = sp.identity(n, format="csr")
    return (sp.kron(d, eye) + sp.kron(eye, d)).tocsr()


class AMGPreconditioner:
    """Algebraic multigrid V-cycle on ``diag(m/dt) - lap_fd``.

    The 5-point operator is spectrally equivalent to the spectral one, so one
    V-cycle is a good preconditioner even when ``m`` varies over many orders
    of magnitude (tall bubbles), where the constant-coefficient spectral
    inverse needs hundreds of iterations.  The hierarchy is rebuilt only when
    dt changes or the last solve needed too many iterations.
    """

    def __init__(self, n, rebuild_after=30):
        self.lap = _fd_laplacian(n)
        self.rebuild_after = rebuild_after
        self._dt = None
        self._ml = None
        self.last_iterations = 0

    def __call__(self, m, dt):
        import pyamg

        if self._ml is None or dt != self._dt or self.last_iterations > self.rebuild_after:
            mat = sp.diags(m.ravel() / dt) - self.lap
            self._ml = pyamg.smoothed_aggregation_solver(mat.tocsr())
            self._dt = dt
        op = self._ml.aspreconditioner(cycle="V")
        n = m.shape[0]
        return lambda r: op.matvec(r.ravel()).reshape(n, n)


def step(state, cfg, dt, preconditioner="spectral", tol=1e-10, maxit=2000):
    """Advance one semi-implicit step; the caller decides on acceptance.

    ``preconditioner`` is ``"spectral"`` (scaled constant-coefficient
    inverse), ``"plain"`` (unscaled) or a callable ``(m, dt) -> apply`` such
    as :class:`AMGPreconditioner`.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    u = state.u
    m = np.exp(u)
    rhs = laplacian(u) + nonlocal_terms(u, cfg) if state.force is None else state.force
    ws = workspace(u.shape[0])
    m_dt = m / dt
    apply_a = lambda v: m_dt * v - ws.apply(v, ws.symbol)
    if preconditioner in ("spectral", "plain"):
        apply_m = _spectral_preconditioner(m, dt, scaled=preconditioner == "spectral")
    else:
        apply_m = preconditioner(m, dt)
    # warm start from the last velocity: increments change slowly at fixed dt
    guess = None if state.du_dt is None else state.du_dt * dt
    delta, its = pcg(apply_a, rhs, apply_m, tol=tol, maxit=maxit, x0=guess)
    if isinstance(preconditioner, AMGPreconditioner):
        preconditioner.last_iterations = its
    u_new = u + delta
    # restore int e^u exactly (J and N are shift invariant)
    u_new += np.log(state.mass_e_u) - log_mass(np.ones_like(u_new), u_new)
    new = _make_state(u_new, cfg, state.t + dt, state.step_count + 1, (u_new - u) / dt)
    if not (new.mass_h1 > 0 and new.mass_h2 > 0):
        raise SolverError(f"weighted mass lost positivity at t={new.t:.6g}")
    return new, its


@dataclass
class TrajectoryRecord:
    n: int
    rows: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    tail: list = field(default_factory=list)
    rejections: int = 0
    iterations: int = 0
    status: str = "running"
    bounds: dict = field(default_factory=dict)
    max_tail: int = 64

    def column(self, name):
        k = CSV_COLUMNS.index(name)
        return np.array([r[k] for r in self.rows])

    def add(self, state, cfg, keep_field=False):
        diss, res = diagnostics(state.u, cfg, state.force)
        self.rows.append((state.t, state.energy, state.mass_e_u, state.mass_h1,
                          state.mass_h2, float(state.u.max()), float(state.u.min()),
                          diss, res))
        if keep_field:
            self.snapshots.append((state.t, state.u.copy(),
                                   None if state.du_dt is None else state.du_dt.copy(), diss))
        self.tail.append((state.t, state.u))
        if len(self.tail) > self.max_tail:
            # thin the interior, always keeping the first and last entries
            self.tail = self.tail[:-1:2] + [self.tail[-1]]
        for key, v in (("mass_h1", state.mass_h1), ("mass_h2", state.mass_h2)):
            lo, hi = self.bounds.get(key, (v, v))
            self.bounds[key] = (min(lo, v), max(hi, v))
        return diss, res

    def energy_identity(self):
        """(cumulative energy decrease, trapezoid integral of dissipation)."""
        t = self.column("t")
        e = self.column("energy")
        d = self.column("dissipation")
        return float(e[0] - e[-1]), float(np.sum(0.5 * (d[1:] + d[:-1]) * np.diff(t)))

    def mass_drift(self):
        m = self.column("mass_eu")
        return float(np.max(np.abs(m - m[0])) / m[0])


@dataclass
class RunResult:
    record: TrajectoryRecord
    state: FlowState


def run(u0, cfg, t_end=None, sample_every=1, max_steps=None, keep_fields=False,
        stop_residual=None, stop_dissipation=None, stop=None, max_wall=None,
        mass_floor=1e-10):
    """Integrate from ``u0`` to ``t_end`` (default ``cfg.t_end``) with adaptive dt.

    dt is halved when a step raises the energy by more than the tolerance or
    the inner solve fails, and doubled (capped at ``cfg.dt_max``) after 10
    consecutive accepted steps.  Sampling happens every ``sample_every``
    accepted steps and at the end.  Early exits: ``stop_residual`` (with
    ``stop_dissipation``) reached at a sample, ``stop(state)`` returning a
    truthy reason, ``max_steps`` or ``max_wall`` seconds.  The weighted
    masses are monitored; dropping below ``mass_floor`` times their initial
    value aborts the run.
    """
    t_end = cfg.t_end if t_end is None else t_end
    state = FlowState.initial(u0, cfg)
    n = state.u.shape[0]
    rec = TrajectoryRecord(n=n)
    rec.add(state, cfg, keep_fields)
    tol_e = cfg.energy_tolerance(state.energy)
    floors = (mass_floor * state.mass_h1, mass_floor * state.mass_h2)
    precond = AMGPreconditioner(n) if cfg.preconditioner == "amg" else cfg.preconditioner
    dt = cfg.dt_init
    clean = 0
    start = time.monotonic()
    sampled = True
    while True:
        if state.t >= t_end * (1 - 1e-14):
            rec.status = "t_end"
            break
        if max_steps is not None and state.step_count >= max_steps:
            rec.status = "max_steps"
            break
        if max_wall is not None and time.monotonic() - start > max_wall:
            rec.status = "max_wall"
            break
        if dt < 1e-12:
            rec.status = "dt_underflow"
            raise SolverError(
                f"time step underflow (dt={dt:.3e}) at t={state.t:.6g}, max u={state.u.max():.3f}: "
                "stiffness from near blow-up or exhausted grid resolution")
        h = min(dt, t_end - state.t)
        try:
            new, its = step(state, cfg, h, precond)
        except StepFailure as exc:
            log.debug("step failed at t=%g dt=%g: %s", state.t, h, exc)
            rec.rejections += 1
            dt /= 2
            clean = 0
            continue
        if new.energy > state.energy + tol_e:
            rec.rejections += 1
            dt /= 2
            clean = 0
            continue
        if new.mass_h1 < floors[0] or new.mass_h2 < floors[1]:
            raise SolverError(f"weighted mass bound violated at t={new.t:.6g}: "
                              f"int h1 e^u={new.mass_h1:.3e}, int h2 e^-u={new.mass_h2:.3e}")
        state = new
        rec.iterations += its
        clean += 1
        if clean >= 10:
            dt = min(2 * dt, cfg.dt_max)
            clean = 0
        sampled = state.step_count % sample_every == 0
        if sampled:
            diss, res = rec.add(state, cfg, keep_fields)
            if stop_residual is not None and res <= stop_residual and (
                    stop_dissipation is None or diss <= stop_dissipation):
                rec.status = "converged"
                break
            if stop is not None:
                reason = stop(state)
                if reason:
                    rec.status = str(reason)
                    break
    if not sampled:
        rec.add(state, cfg, keep_fields)
    return RunResult(rec, state)


@dataclass(frozen=True)
class Certificate:
    verdict: str
    residual: float
    dissipation: float
    max_change: float
    c1_growth: float

    def __str__(self):
        return (f"{self.verdict}: residual={self.residual:.3e} dissipation={self.dissipation:.3e} "
                f"max_change={self.max_change:.3e} c1_growth={self.c1_growth:.3f}")


def convergence_certificate(state, cfg, record=None, residual_tol=1e-6,
                            dissipation_tol=1e-8, change_tol=1e-5, growth_tol=2.0):
    """Classify a finished run as CONVERGED, BLOWUP-SUSPECT or UNDECIDED.

    The max-norm change is measured between the final state and the last
    retained snapshot at or before 90% of the final time.  Blow-up is
    suspected when ``c1 = max u - log int h1 e^u`` (so ``r1 = e^(-c1/2)``)
    rose by more than ``growth_tol`` over the run and was still rising over
    the final 10%.
    """
    diss, res = diagnostics(state.u, cfg)
    change = np.nan
    growth = 0.0
    if record is not None and record.rows:
        t_cut = record.tail[0][0] + 0.9 * (state.t - record.tail[0][0])
        earlier = [u for t, u in record.tail if t <= t_cut]
        ref = earlier[-1] if earlier else record.tail[0][1]
        change = float(np.max(np.abs(state.u - ref)))
        t = record.column("t")
        c1 = record.column("umax") - np.log(record.column("mass_h1"))
        late = c1[t >= t[0] + 0.9 * (t[-1] - t[0])]
        rising = len(late) >= 2 and late[-1] > late[0]
        growth = float(c1[-1] - c1[0])
        if record.status == "resolution-exhausted" or (growth > growth_tol and rising):
            if res > residual_tol:
                return Certificate("BLOWUP-SUSPECT", res, diss, change, growth)
    elif record is None:
        change = 0.0 if res == 0 else np.nan
    if res <= residual_tol and diss <= dissipation_tol and change <= change_tol:
        return Certificate("CONVERGED", res, diss, change, growth)
    return Certificate("UNDECIDED", res, diss, change, growth)
