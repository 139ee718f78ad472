"""Initial data from short descriptors.

``zero``, ``cosine a``, ``random a``, ``bubble eps`` and
``test_function eps``; the last two are centred at a point ``p``.
"""

import numpy as np

from .barrier import TestFunctionParams, build_test_function
from .errors import ValidationError
from .green import green_function
from .mfe import solve_mfe
from .torus import Grid


def _args(desc, kind, count, defaults):
    parts = desc.split()
    vals = parts[1:]
    if len(vals) > count:
        raise ValidationError(f"u0 {kind!r} takes at most {count} parameter(s), got {vals}")
    try:
        out = [float(v) for v in vals]
    except ValueError:
        raise ValidationError(f"u0 {kind!r}: cannot parse parameters {vals}") from None
    return out + list(defaults[len(out):])


def smooth_random(n, amplitude, seed, kmax=4):
    """Mean-zero trigonometric polynomial of degree ``kmax`` with max|u| = amplitude."""
    rng = np.random.default_rng(seed)
    k = np.fft.fftfreq(n, 1.0 / n)
    kx, ky = np.meshgrid(k, k, indexing="ij")
    mask = (np.abs(kx) <= kmax) & (np.abs(ky) <= kmax)
    mask[0, 0] = False
    spec = np.zeros((n, n), dtype=complex)
    spec[mask] = rng.standard_normal(mask.sum()) + 1j * rng.standard_normal(mask.sum())
    u = np.real(np.fft.ifft2(spec))
    if np.max(np.abs(u)) > 0:
        u *= amplitude / np.max(np.abs(u))
    return u


def initial_data(desc, n, cfg, p=(0.5, 0.5), seed=0):
    """Build ``u0`` on the ``n`` grid from a descriptor string."""
    parts = desc.split()
    if not parts:
        raise ValidationError("empty initial-data descriptor")
    kind = parts[0]
    grid = Grid(n)
    x, y = grid.coords
    if kind == "zero":
        _args(desc, kind, 0, ())
        return np.zeros((n, n))
    if kind == "cosine":
        (a,) = _args(desc, kind, 1, (1.0,))
        return a * (np.cos(2 * np.pi * x) + 0.5 * np.sin(2 * np.pi * y))
    if kind == "random":
        (a,) = _args(desc, kind, 1, (1.0,))
        return smooth_random(n, a, seed)
    if kind == "bubble":
        (eps,) = _args(desc, kind, 1, (1e-2,))
        if not eps > 0:
            raise ValidationError(f"bubble epsilon must be > 0, got {eps}")
        return -2 * np.log(grid.distance(p) ** 2 + eps)
    if kind == "test_function":
        (eps,) = _args(desc, kind, 1, (1.5e-4,))
        gd = green_function(p, grid)
        params = TestFunctionParams.from_green(eps, gd)
        params.check_resolution(n, core=False)
        sol = solve_mfe(gd.p, cfg, n, green=gd)
        return build_test_function(params, sol.w, n, gd)
    raise ValidationError(f"unknown initial data {kind!r}")
