"""Green function of ``-lap G = 8 pi delta_p - 8 pi`` with ``int G = 0``.

Two representations are kept side by side:

* ``g_field``: the spectral solution driven by a single-node delta of
  weight ``n^2``.  It satisfies the discrete identities exactly (zero mean,
  ``int grad G . grad w = 8 pi (w(p) - int w)`` for the spectral pairing).
* ``h_field``: the smooth remainder ``H = G + 4 log r`` of the continuum
  Green function.  It is obtained by splitting ``G = -4 chi(r) log r + R``
  with a smooth radial cutoff ``chi`` (1 near ``p``, 0 beyond ``R_OUT``), so
  that ``R`` solves a Poisson problem with a smooth right-hand side and is
  computed to spectral accuracy.  ``A(p) = H(p)`` and ``(b1, b2) = grad H(p)``.

The grid-delta field is only accurate to ``O((h/r)^2)`` near ``p``, which is
too coarse for the regular part; the ring fit is therefore applied to ``H``
by default (``source="delta"`` fits the raw field instead).
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate as quad

from .errors import ValidationError
from .torus import Grid, inverse_laplacian, resample

EIGHT_PI = 8 * np.pi
R_IN = 0.1
R_OUT = 0.4
# mean of log|x| over the unit square centred at 0
LOG_CELL_MEAN = np.log(0.5) + 0.5 * (np.log(2.0) - 3.0 + np.pi / 2)
# the smooth part is solved on this grid, then subsampled or interpolated
_SMOOTH_N = 512


class ResolutionError(ValidationError):
    """Grid too coarse for the requested ring fit."""


def _step(t):
    """C-infinity step 0 -> 1 on [0, 1] and its first two derivatives."""
    t = np.clip(t, 0.0, 1.0)
    inner = (t > 0) & (t < 1)
    s = (t >= 1).astype(float)
    s1 = np.zeros_like(t)
    s2 = np.zeros_like(t)
    ti = t[inner]
    f = np.exp(-1.0 / ti)
    g = np.exp(-1.0 / (1.0 - ti))
    f1 = f / ti**2
    f2 = f * (1.0 / ti**4 - 2.0 / ti**3)
    g1 = -g / (1.0 - ti) ** 2
    g2 = g * (1.0 / (1.0 - ti) ** 4 - 2.0 / (1.0 - ti) ** 3)
    q = f + g
    num = f1 * g - f * g1
    s[inner] = f / q
    s1[inner] = num / q**2
    s2[inner] = ((f2 * g - f * g2) * q - 2 * num * (f1 + g1)) / q**3
    return s, s1, s2


def cutoff(r):
    """Radial cutoff ``chi`` with derivatives in r: (chi, chi', chi'')."""
    w = R_OUT - R_IN
    s, s1, s2 = _step((r - R_IN) / w)
    return 1.0 - s, -s1 / w, -s2 / w**2


def _cutoff_log_integral():
    """``int chi(|x|) log|x| dx`` over the plane (support inside the torus)."""
    inner = R_IN**2 / 2 * np.log(R_IN) - R_IN**2 / 4
    outer, _ = quad.quad(lambda r: cutoff(np.array([r]))[0][0] * r * np.log(r),
                         R_IN, R_OUT, epsabs=1e-15, epsrel=1e-14, limit=200)
    return 2 * np.pi * (inner + outer)


@lru_cache(maxsize=8)
def _smooth_remainder(n):
    """``H = G + 4 log r`` for the pole at the origin, on the ``n`` grid."""
    m = _SMOOTH_N
    grid = Grid(m)
    r = grid.distance((0.0, 0.0))
    chi, c1, c2 = cutoff(r)
    with np.errstate(divide="ignore", invalid="ignore"):
        logr = np.log(r)
        q = np.where(r > 0, 2 * c1 / r + logr * (c2 + c1 / r), 0.0)
    # lap R = 8 pi + 4 lap(chi log r) away from the pole; zero mean analytically
    # the constant makes G = -4 chi log r + rem integrate to zero
    rem = inverse_laplacian(EIGHT_PI + 4 * q) + 4 * _cutoff_log_integral()
    if n > m:
        rem = resample(rem, n)
    else:
        # coarse nodes are a subset of the fine ones
        rem = rem[::m // n, ::m // n]
    grid = Grid(n)
    r = grid.distance((0.0, 0.0))
    chi = cutoff(r)[0]
    with np.errstate(divide="ignore"):
        h = rem + 4 * (1.0 - chi) * np.where(r > 0, np.log(np.where(r > 0, r, 1.0)), 0.0)
    h.setflags(write=False)
    return h


@lru_cache(maxsize=8)
def _delta_solution(n):
    rhs = np.full((n, n), EIGHT_PI)
    rhs[0, 0] -= EIGHT_PI * n * n
    g = inverse_laplacian(rhs)
    g -= g.mean()
    g.setflags(write=False)
    return g


def _roll_to(field, node):
    return np.roll(field, shift=node, axis=(0, 1))


def ring_fit(field, p, grid, lo=4, hi=16):
    """Fit ``field ~ A + b1 dx + b2 dy + (r^2, quadratic and cubic terms)``
    on the rings ``lo*h <= r <= hi*h`` around ``p``.

    A linear-in-``r^2`` model is the Richardson extrapolation of the O(r^2)
    term to ``r = 0``; the higher harmonics keep anisotropic terms from
    leaking into ``A`` and ``b``.  Returns (A, b1, b2, rms fit residual).
    """
    h = grid.spacing
    if hi * h > 0.25:
        raise ResolutionError(f"ring fit needs {hi}*h <= 1/4 (n >= {4 * hi}), got n = {grid.n}")
    dx, dy = grid.displacement(p)
    r = np.hypot(dx, dy)
    sel = (r >= (lo - 0.5) * h) & (r <= (hi + 0.5) * h)
    x, y, rr = dx[sel] / h, dy[sel] / h, r[sel] ** 2 / h**2
    basis = np.stack([np.ones_like(x), x, y, rr, x * x - y * y, x * y,
                      x**3 - 3 * x * y**2, 3 * x**2 * y - y**3, rr * x, rr * y,
                      rr * rr, x**4 - 6 * x * x * y * y + y**4], axis=1)
    coef, *_ = np.linalg.lstsq(basis, field[sel], rcond=None)
    resid = field[sel] - basis @ coef
    return float(coef[0]), float(coef[1] / h), float(coef[2] / h), float(np.sqrt(np.mean(resid**2)))


@dataclass(frozen=True)
class GreenData:
    p: tuple
    grid: Grid
    g_field: np.ndarray
    h_field: np.ndarray
    regular_part: float
    b1: float
    b2: float
    fit_error: float
    source: str = "smooth"

    @property
    def node(self):
        return self.grid.node(self.p)

    @property
    def distance(self):
        return self.grid.distance(self.p)

    def continuum(self):
        """Continuum ``G_p`` on the grid: ``H - 4 log r``, ``+inf`` at ``p``."""
        r = self.distance
        with np.errstate(divide="ignore"):
            return self.h_field - 4 * np.log(r)

    def exp_minus_g(self):
        """``e^(-G_p) = r^4 e^(-H)``, exactly 0 at ``p``."""
        return self.distance**4 * np.exp(-self.h_field)

    def beta(self):
        """``G + 4 log r - A - b1 r cos - b2 r sin``, the O(r^2) remainder."""
        dx, dy = self.grid.displacement(self.p)
        return self.h_field - self.regular_part - self.b1 * dx - self.b2 * dy

    def corrected_mean(self):
        """Mean of ``g_field`` with the singular node replaced by the exact
        cell average of ``-4 log r + A``."""
        n = self.grid.n
        i, j = self.node
        cell = -4 * (np.log(self.grid.spacing) + LOG_CELL_MEAN) + self.regular_part
        return float((np.sum(self.g_field) - self.g_field[i, j] + cell) / n**2)


def green_function(p, grid, source="smooth", lo=4, hi=16, max_fit_error=1e-3):
    """Green data at the grid node nearest to ``p``."""
    if not isinstance(grid, Grid):
        grid = Grid(int(grid))
    if source not in ("smooth", "delta"):
        raise ValidationError(f"source must be 'smooth' or 'delta', got {source!r}")
    p = grid.snap(p)
    node = grid.node(p)
    g = _roll_to(_delta_solution(grid.n), node)
    h = _roll_to(_smooth_remainder(grid.n), node)
    r = grid.distance(p)
    with np.errstate(divide="ignore"):
        fit_field = h if source == "smooth" else g + 4 * np.log(np.where(r > 0, r, 1.0))
    a, b1, b2, err = ring_fit(fit_field, p, grid, lo, hi)
    if err > max_fit_error:
        raise ResolutionError(f"ring fit residual {err:.2e} exceeds {max_fit_error:.0e}; "
                              "refine the grid")
    return GreenData(p=p, grid=grid, g_field=g, h_field=h, regular_part=a,
                     b1=b1, b2=b2, fit_error=err, source=source)


def regular_part(p, grid, source="smooth"):
    """``A(p)`` and its fit error."""
    gd = green_function(p, grid, source)
    return gd.regular_part, gd.fit_error


def expansion_coeffs(p, grid, source="smooth"):
    gd = green_function(p, grid, source)
    return gd.b1, gd.b2
