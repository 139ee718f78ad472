"""Periodic grid, quadrature and spectral operators on the flat unit torus.

Fields are plain ``(n, n)`` float arrays indexed ``[i, j]`` with
``x = i/n``, ``y = j/n``.  Quadrature is the periodic trapezoid rule, so the
weights sum to exactly one (unit area).
"""

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy import fft

try:  # optional: FFTW plans are about twice as fast as pocketfft at n = 128
    import pyfftw
except ImportError:  # pragma: no cover
    pyfftw = None

from .errors import FieldError, SolvabilityError, ValidationError


@dataclass(frozen=True)
class Grid:
    n: int

    def __post_init__(self):
        n = self.n
        if not isinstance(n, (int, np.integer)) or n < 16 or n & (n - 1):
            raise ValidationError(f"grid size must be a power of two >= 16, got {n!r}")

    @property
    def spacing(self):
        return 1.0 / self.n

    @property
    def area_element(self):
        return 1.0 / self.n**2

    @cached_property
    def coords(self):
        x = np.arange(self.n) / self.n
        return np.meshgrid(x, x, indexing="ij")

    def node(self, p):
        """Index of the grid node nearest to the point ``p`` (wrapped)."""
        i = int(np.rint(p[0] * self.n)) % self.n
        j = int(np.rint(p[1] * self.n)) % self.n
        return i, j

    def snap(self, p):
        i, j = self.node(p)
        return (i / self.n, j / self.n)

    def displacement(self, p):
        """Minimum-image displacement ``x - p`` per axis, each in [-1/2, 1/2)."""
        X, Y = self.coords
        dx = (X - p[0] + 0.5) % 1.0 - 0.5
        dy = (Y - p[1] + 0.5) % 1.0 - 0.5
        return dx, dy

    def distance(self, p):
        dx, dy = self.displacement(p)
        return np.hypot(dx, dy)

    def sample(self, func):
        X, Y = self.coords
        return np.asarray(func(X, Y), dtype=float) * np.ones((self.n, self.n))


def grid_of(f):
    f = np.asarray(f)
    if f.ndim != 2 or f.shape[0] != f.shape[1]:
        raise FieldError(f"expected a square 2-D field, got shape {f.shape}")
    return Grid(f.shape[0])


def check_field(f):
    f = np.asarray(f, dtype=float)
    grid_of(f)
    if not np.all(np.isfinite(f)):
        raise FieldError("field contains non-finite values")
    return f


class SpectralWorkspace:
    """Fourier multipliers for one grid size.

    Holds ``-|2 pi k|^2`` on the half-spectrum used by ``rfft2`` and its
    pseudo-inverse with the zero mode mapped to zero.  Instances are cached
    per ``n``; the multipliers are read-only, and with pyfftw installed the
    transforms run through reusable FFTW plans (scipy.fft otherwise).
    """

    def __init__(self, n):
        self.grid = Grid(n)
        kx = np.fft.fftfreq(n, 1.0 / n)
        ky = np.fft.rfftfreq(n, 1.0 / n)
        KX, KY = np.meshgrid(kx, ky, indexing="ij")
        self.symbol = -(2 * np.pi) ** 2 * (KX**2 + KY**2)
        inv = np.zeros_like(self.symbol)
        nz = self.symbol != 0
        inv[nz] = 1.0 / self.symbol[nz]
        self.inverse = inv
        # odd derivatives drop the Nyquist modes
        dkx = np.where(np.abs(KX) == n // 2, 0.0, KX)
        dky = np.where(KY == n // 2, 0.0, KY)
        self.ddx = 2j * np.pi * dkx
        self.ddy = 2j * np.pi * dky
        # rfft2 stores half the columns; interior ones count twice
        w = np.full(KX.shape, 2.0)
        w[:, 0] = 1.0
        w[:, -1] = 1.0
        self.parseval = w
        for a in (self.symbol, self.inverse, self.ddx, self.ddy, self.parseval):
            a.setflags(write=False)
        self._plans = self._fftw_plans(n) if pyfftw is not None else None

    @staticmethod
    def _fftw_plans(n):
        # FFTW_ESTIMATE keeps the plan, and so the rounding, reproducible
        half = (n, n // 2 + 1)
        rin = pyfftw.empty_aligned((n, n), dtype="float64")
        cout = pyfftw.empty_aligned(half, dtype="complex128")
        cin = pyfftw.empty_aligned(half, dtype="complex128")
        rout = pyfftw.empty_aligned((n, n), dtype="float64")
        fwd = pyfftw.FFTW(rin, cout, axes=(0, 1), flags=("FFTW_ESTIMATE",))
        bwd = pyfftw.FFTW(cin, rout, axes=(0, 1), direction="FFTW_BACKWARD",
                          flags=("FFTW_ESTIMATE",))
        return rin, cout, cin, rout, fwd, bwd

    def forward(self, f):
        if self._plans is None:
            return fft.rfft2(f)
        rin, cout, _, _, fwd, _ = self._plans
        rin[...] = f
        fwd.execute()
        return cout.copy()

    def backward(self, fh):
        n = self.grid.n
        if self._plans is None:
            return fft.irfft2(fh, s=(n, n))
        _, _, cin, rout, _, bwd = self._plans
        cin[...] = fh
        bwd.execute()
        return rout * (1.0 / (n * n))

    def apply(self, f, multiplier):
        return self.backward(self.forward(f) * multiplier)


@lru_cache(maxsize=16)
def workspace(n):
    return SpectralWorkspace(n)


def integrate(f):
    """Integral over the unit torus (periodic trapezoid rule)."""
    f = check_field(f)
    return float(np.mean(f))


def laplacian(f):
    f = check_field(f)
    ws = workspace(f.shape[0])
    return ws.apply(f, ws.symbol)


def inverse_laplacian(rhs):
    """Zero-mean ``phi`` with ``lap(phi) = rhs - mean(rhs)``; no solvability check."""
    ws = workspace(rhs.shape[0])
    return ws.apply(rhs, ws.inverse)


def solve_poisson(rhs, tol=1e-12):
    rhs = check_field(rhs)
    mean = float(np.mean(rhs))
    if abs(mean) > tol * max(1.0, float(np.max(np.abs(rhs)))):
        raise SolvabilityError(mean)
    return inverse_laplacian(rhs)


def gradient(f):
    f = check_field(f)
    ws = workspace(f.shape[0])
    fh = ws.forward(f)
    return ws.backward(fh * ws.ddx), ws.backward(fh * ws.ddy)


def dirichlet_energy(f):
    """Half the integral of ``|grad f|^2``, summed over Fourier modes."""
    f = check_field(f)
    ws = workspace(f.shape[0])
    fh = ws.forward(f) / f.size
    return float(0.5 * np.sum(-ws.symbol * ws.parseval * np.abs(fh) ** 2))


def dirichlet_pairing(f, g):
    """Integral of ``grad f . grad g``."""
    f = check_field(f)
    g = check_field(g)
    ws = workspace(f.shape[0])
    fh = ws.forward(f) / f.size
    gh = ws.forward(g) / g.size
    return float(np.sum(-ws.symbol * ws.parseval * (fh * np.conj(gh)).real))


def _resample_axis(fh, n_new, axis):
    fh = np.moveaxis(fh, axis, 0)
    n = fh.shape[0]
    out = np.zeros((n_new,) + fh.shape[1:], dtype=complex)
    if n_new > n:
        h = n // 2
        out[:h] = fh[:h]
        out[n_new - h + 1:] = fh[h + 1:]
        # the source Nyquist mode is shared between +n/2 and -n/2
        out[h] = 0.5 * fh[h]
        out[n_new - h] = 0.5 * fh[h]
    else:
        h = n_new // 2
        out[:h] = fh[:h]
        out[h + 1:] = fh[n - h + 1:]
        out[h] = fh[h] + fh[n - h]
    return np.moveaxis(out * (n_new / n), 0, axis)


def resample(f, n_new):
    """Trigonometric interpolation of ``f`` onto an ``n_new`` grid."""
    f = check_field(f)
    n = f.shape[0]
    if n_new == n:
        return f.copy()
    Grid(n_new)
    fh = np.fft.fft2(f)
    fh = _resample_axis(fh, n_new, 0)
    fh = _resample_axis(fh, n_new, 1)
    return np.real(np.fft.ifft2(fh))
