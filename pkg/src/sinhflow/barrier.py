"""Concentrating test function glued to the Green function, its energy
against the barrier level, and the eps(-log eps) expansion of the gap.

For ``R = alpha sqrt(eps)`` with ``alpha^4 eps = 1 / log(-log eps)``:

    Phi = -2 log(r^2 + eps) + b.x + log eps                     r < R
          G - eta beta - 2 log((alpha^2 + 1)/alpha^2) - A + log eps   R <= r < 2R
          G - 2 log((alpha^2 + 1)/alpha^2) - A + log eps          r >= 2R

and the test function is ``Phi - w_p0``.  ``beta = G + 4 log r - A - b.x``
is the remainder of the local Green expansion and ``eta`` is a radial
cutoff equal to 1 for ``r <= R`` and 0 for ``r >= 2R``.
"""

from dataclasses import dataclass, field

import numpy as np

from .energy import EIGHT_PI, energy_j
from .errors import DomainError, ParameterError, ValidationError
from .green import _step, green_function
from .torus import Grid, gradient, laplacian, resample

CUTOFFS = ("quintic", "cubic", "smooth")
# bubble resolution: R >= 8 h and the core scale sqrt(eps) >= 3 h
MIN_RADIUS_CELLS = 8
MIN_CORE_CELLS = 3


def alpha_of(eps):
    return float((eps * np.log(-np.log(eps))) ** -0.25)


def eta_profile(s, kind="quintic"):
    """Cutoff as a function of ``s = (r - R)/R`` clipped to [0, 1]."""
    s = np.clip(s, 0.0, 1.0)
    if kind == "quintic":
        return 1.0 - s**3 * (10 - 15 * s + 6 * s * s)
    if kind == "cubic":
        return 1.0 - s * s * (3 - 2 * s)
    if kind == "smooth":
        return 1.0 - _step(s)[0]
    raise ValidationError(f"unknown cutoff {kind!r}; expected one of {CUTOFFS}")


@dataclass(frozen=True)
class TestFunctionParams:
    __test__ = False  # not a pytest class

    epsilon: float
    p0: tuple
    A: float
    b1: float = 0.0
    b2: float = 0.0
    cutoff: str = "quintic"

    def __post_init__(self):
        eps = self.epsilon
        if not (0 < eps < np.exp(-np.e)):
            raise ParameterError(f"epsilon must lie in (0, e^-e) = (0, {np.exp(-np.e):.4f}), got {eps}")
        if self.cutoff not in CUTOFFS:
            raise ParameterError(f"unknown cutoff {self.cutoff!r}; expected one of {CUTOFFS}")
        if self.radius >= 1 / 8:
            raise ParameterError(f"alpha*sqrt(eps) = {self.radius:.4f} must be < 1/8 "
                                 f"(epsilon = {eps} too large)")

    @property
    def alpha(self):
        return alpha_of(self.epsilon)

    @property
    def radius(self):
        return self.alpha * np.sqrt(self.epsilon)

    @classmethod
    def from_green(cls, epsilon, green, cutoff="quintic"):
        return cls(epsilon, green.p, green.regular_part, green.b1, green.b2, cutoff)

    def check_resolution(self, n, core=True):
        """Raise unless ``R >= 8 h`` and (with ``core``) ``sqrt(eps) >= 3 h``."""
        h = 1.0 / n
        if self.radius < MIN_RADIUS_CELLS * h:
            raise ParameterError(f"alpha*sqrt(eps) = {self.radius:.3e} < {MIN_RADIUS_CELLS}/n "
                                 f"= {MIN_RADIUS_CELLS * h:.3e}: bubble not resolved at n = {n}")
        if core and np.sqrt(self.epsilon) < MIN_CORE_CELLS * h:
            raise ParameterError(f"sqrt(eps) = {np.sqrt(self.epsilon):.3e} < {MIN_CORE_CELLS}/n "
                                 f"= {MIN_CORE_CELLS * h:.3e}: bubble core not resolved at n = {n}")


def required_resolution(epsilon, n_min=16, n_max=4096):
    """Smallest power-of-two grid on which ``epsilon`` is admissible."""
    params = TestFunctionParams(epsilon, (0.0, 0.0), 0.0)
    n = n_min
    while n <= n_max:
        try:
            params.check_resolution(n)
            return n
        except ParameterError:
            n *= 2
    raise ParameterError(f"epsilon = {epsilon} needs a grid finer than n_max = {n_max}")


def build_phi(params, green):
    """``Phi_eps`` on the grid of ``green`` (without the ``-w_p0`` shift)."""
    if green.grid.snap(params.p0) != green.p:
        raise ValidationError("green data and params refer to different points")
    eps, a, R = params.epsilon, params.alpha, params.radius
    dx, dy = green.grid.displacement(green.p)
    r = np.hypot(dx, dy)
    lin = params.b1 * dx + params.b2 * dy
    const = -2 * np.log((a * a + 1) / (a * a)) - params.A + np.log(eps)
    # G - eta beta = H - 4 log r - eta (H - A - b.x); evaluated off the pole only
    rr = np.where(r > 0, r, 1.0)
    g = green.h_field - 4 * np.log(rr)
    beta = green.h_field - params.A - lin
    eta = eta_profile((r - R) / R, params.cutoff)
    inner = -2 * np.log(r * r + eps) + lin + np.log(eps)
    return np.where(r < R, inner, np.where(r < 2 * R, g - eta * beta + const, g + const))


def build_test_function(params, w_p0, n=None, green=None):
    """``Phi_eps - w_p0`` sampled on an ``n`` grid (default: that of ``w_p0``).

    ``w_p0`` is interpolated spectrally when ``n`` differs from its grid.
    """
    n = w_p0.shape[0] if n is None else n
    grid = Grid(n)
    if green is None or green.grid.n != n:
        green = green_function(params.p0, grid)
    w = resample(w_p0, n) if w_p0.shape[0] != n else w_p0
    return build_phi(params, green) - w


def interface_mismatch(params, green):
    """Max jump between the inner and annulus formulas on the ring ``r = R``.

    Both formulas are evaluated at points of the circle; the construction
    matches them up to the O(r^2) remainder, so the jump is ``O(R^2)``.
    """
    eps, a, R = params.epsilon, params.alpha, params.radius
    th = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    x, y = R * np.cos(th), R * np.sin(th)
    lin = params.b1 * x + params.b2 * y
    inner = -2 * np.log(R * R + eps) + lin + np.log(eps)
    const = -2 * np.log((a * a + 1) / (a * a)) - params.A + np.log(eps)
    # on r = R, eta = 1 so G - beta = -4 log R + A + b.x exactly
    annulus = -4 * np.log(R) + params.A + lin + const
    return float(np.max(np.abs(inner - annulus)))


def _log_h1_derivatives(p, cfg, n):
    """(log h1(p), lap log h1(p), grad log h1(p)); spectral when h1 > 0
    everywhere, otherwise 5-point differences at p."""
    h1 = cfg.weights(n)[0]
    i, j = Grid(n).node(p)
    if h1[i, j] <= 0:
        raise DomainError("h1(p)", float(h1[i, j]))
    if np.all(h1 > 0):
        lh = np.log(h1)
        gx, gy = gradient(lh)
        return float(lh[i, j]), float(laplacian(lh)[i, j]), (float(gx[i, j]), float(gy[i, j]))
    nb = [h1[(i + 1) % n, j], h1[i - 1, j], h1[i, (j + 1) % n], h1[i, j - 1]]
    if min(nb) <= 0:
        raise DomainError("h1 near p", float(min(nb)))
    l0 = np.log(h1[i, j])
    lxp, lxm, lyp, lym = np.log(nb)
    lap = (lxp + lxm + lyp + lym - 4 * l0) * n * n
    return float(l0), float(lap), (float((lxp - lxm) * n / 2), float((lyp - lym) * n / 2))


def condition_check(p, cfg, n=128):
    """``8 pi - rho2 + lap log h1(p)`` (flat metric, zero curvature)."""
    return EIGHT_PI - cfg.rho2 + _log_h1_derivatives(p, cfg, n)[1]


def predicted_c1(p0, cfg, w_p0, green):
    """``-2 pi [8 pi - rho2 + lap log h1 + sum_i (b_i + d_i log(h1 e^-w))^2]`` at p0."""
    n = w_p0.shape[0]
    _, lap, (lx, ly) = _log_h1_derivatives(p0, cfg, n)
    i, j = Grid(n).node(p0)
    wx, wy = gradient(w_p0)
    k1 = lx - wx[i, j]
    k2 = ly - wy[i, j]
    return float(-2 * np.pi * (EIGHT_PI - cfg.rho2 + lap
                               + (green.b1 + k1) ** 2 + (green.b2 + k2) ** 2))


def _eval_grid(params, scan_n, n_eval):
    if n_eval in (None, "auto"):
        n_eval = max(scan_n, required_resolution(params.epsilon))
    params.check_resolution(n_eval)
    return n_eval


def barrier_energy(params, cfg, scan, n_eval=None):
    """(J(test function), n used)."""
    n_eval = _eval_grid(params, scan.n, n_eval)
    w = scan.solution(params.p0).w
    u = build_test_function(params, w, n_eval)
    return energy_j(u, cfg), n_eval


def barrier_gap(params, cfg, scan, n_eval=None):
    """``J(Phi_eps - w_p0) - L*``; negative means the test function is below
    the barrier.  The energy is evaluated on ``n_eval`` (default: the
    smallest grid resolving the bubble, at least the scan grid)."""
    return barrier_energy(params, cfg, scan, n_eval)[0] - scan.level


@dataclass
class ExpansionFit:
    c0: float
    c1: float
    c1_predicted: float
    level: float
    eps: np.ndarray
    alpha: np.ndarray
    energies: np.ndarray
    gaps: np.ndarray
    grids: list
    condition: float
    c0_residual: float
    three_term: tuple = field(default=None)

    @property
    def c1_relative_error(self):
        return abs(self.c1 - self.c1_predicted) / abs(self.c1_predicted)


def expansion_fit(eps_list, cfg, scan, n_eval=None, cutoff="quintic", max_condition=1e12):
    """Least-squares ``J ~ c0 + c1 eps(-log eps)`` over ``eps_list``.

    Also reports a three-term fit ``c0 + c1 x + c2 eps`` as a diagnostic of
    the sub-leading remainder.
    """
    eps = np.sort(np.asarray(list(eps_list), dtype=float))[::-1]
    if len(eps) < 4 or len(np.unique(eps)) != len(eps):
        raise ValidationError(f"expansion_fit needs >= 4 distinct epsilon values, got {list(eps_list)}")
    p0 = scan.p0
    green = green_function(p0, Grid(scan.n))
    sol = scan.solution(p0)
    energies, grids, alphas = [], [], []
    for e in eps:
        params = TestFunctionParams.from_green(e, green, cutoff)
        j, n_used = barrier_energy(params, cfg, scan, n_eval)
        energies.append(j)
        grids.append(n_used)
        alphas.append(params.alpha)
    energies = np.array(energies)
    x = eps * -np.log(eps)
    design = np.stack([np.ones_like(x), x], axis=1)
    cond = float(np.linalg.cond(design))
    if cond > max_condition:
        raise ValidationError(f"expansion fit ill-conditioned (condition number {cond:.3e})")
    (c0, c1), *_ = np.linalg.lstsq(design, energies, rcond=None)
    three = None
    if len(eps) >= 4:
        d3 = np.stack([np.ones_like(x), x, eps], axis=1)
        three = tuple(float(c) for c in np.linalg.lstsq(d3, energies, rcond=None)[0])
    resid = energies - design @ np.array([c0, c1])
    return ExpansionFit(c0=float(c0), c1=float(c1),
                        c1_predicted=predicted_c1(p0, cfg, sol.w, green),
                        level=scan.level, eps=eps, alpha=np.array(alphas),
                        energies=energies, gaps=energies - scan.level, grids=grids,
                        condition=cond, c0_residual=float(np.sqrt(np.mean(resid**2))),
                        three_term=three)
