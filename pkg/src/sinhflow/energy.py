"""Energy functional, Moser-Trudinger gap and stationary residual.

The functional is

    J(u) = 1/2 int |grad u|^2 - rho1 log int h1 e^u - rho2 log int h2 e^-u
           + (rho1 - rho2) int u

on the unit torus.  Its L2 gradient is the left side of the stationary
equation returned by :func:`euler_lagrange`.  J is unchanged when a constant
is added to u, for any weights.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParameterError, ValidationError
from .torus import check_field, dirichlet_energy, integrate, laplacian
from .weights import parse_weight, sample_weight

EIGHT_PI = 8 * np.pi


@dataclass(frozen=True)
class FlowConfig:
    """Model parameters and stepping controls.

    ``h1`` and ``h2`` are weight descriptors (see :mod:`sinhflow.weights`) or
    arrays already sampled on the working grid.  ``tol_energy=None`` means the
    run-relative default ``1e-8 |J(u0)| + 1e-12``.
    """

    rho1: float = EIGHT_PI
    rho2: float = 4 * np.pi
    h1: object = "constant 1"
    h2: object = "constant 1"
    dt_init: float = 1e-4
    dt_max: float = 1e-1
    t_end: float = 1.0
    tol_mass: float = 1e-6
    tol_energy: float = None
    tol_mfe: float = 1e-8
    preconditioner: str = "spectral"
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not (0 < self.rho2 < EIGHT_PI):
            raise ParameterError(f"rho2 must lie in (0, 8*pi) = (0, {EIGHT_PI:.6f}), got {self.rho2}")
        if not (0 < self.rho1 <= EIGHT_PI * (1 + 1e-15)):
            raise ParameterError(f"rho1 must lie in (0, 8*pi], got {self.rho1}")
        for name in ("dt_init", "dt_max", "t_end", "tol_mass", "tol_mfe"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ParameterError(f"{name} must be positive, got {v}")
        if self.tol_energy is not None and not self.tol_energy >= 0:
            raise ParameterError(f"tol_energy must be >= 0, got {self.tol_energy}")
        if self.dt_init > self.dt_max:
            raise ParameterError(f"dt_init {self.dt_init} exceeds dt_max {self.dt_max}")
        if self.preconditioner not in ("spectral", "plain", "amg"):
            raise ParameterError("preconditioner must be 'spectral', 'plain' or 'amg', "
                                 f"got {self.preconditioner!r}")
        for name in ("h1", "h2"):
            spec = getattr(self, name)
            if not isinstance(spec, np.ndarray):
                object.__setattr__(self, name, parse_weight(spec))

    def weights(self, n):
        """Sampled ``(h1, h2)`` on the ``n`` grid, validated and cached."""
        if n not in self._cache:
            h1 = sample_weight(self.h1, n)
            h2 = sample_weight(self.h2, n)
            for name, h in (("h1", h1), ("h2", h2)):
                if not np.all(np.isfinite(h)):
                    raise ValidationError(f"{name} has non-finite samples")
                if np.any(h < 0):
                    raise ValidationError(f"{name} must be non-negative; min sample {h.min():.3e}")
            if not np.any(h1 * h2 > 0):
                raise ValidationError("h1*h2 vanishes identically on the grid")
            h1.setflags(write=False)
            h2.setflags(write=False)
            self._cache[n] = (h1, h2)
        return self._cache[n]

    def energy_tolerance(self, j0):
        if self.tol_energy is not None:
            return self.tol_energy
        return 1e-8 * abs(j0) + 1e-12


def log_mass(h, v, which="h e^v"):
    """``log int h e^v`` with the exponent shifted by its max over supp h."""
    support = h > 0
    if not np.any(support):
        raise DomainError(which, 0.0)
    shift = float(np.max(v, where=support, initial=-np.inf))
    e = v - shift
    np.minimum(e, 0.0, out=e)
    np.exp(e, out=e)
    mass = float(np.mean(h * e))
    if not mass > 0:
        raise DomainError(which, mass)
    return np.log(mass) + shift


def log_masses(u, cfg):
    h1, h2 = cfg.weights(u.shape[0])
    return log_mass(h1, u, "int h1 e^u"), log_mass(h2, -u, "int h2 e^-u")


def energy_j(u, cfg, logs=None):
    u = check_field(u)
    a, b = log_masses(u, cfg) if logs is None else logs
    return (dirichlet_energy(u) - cfg.rho1 * a - cfg.rho2 * b
            + (cfg.rho1 - cfg.rho2) * float(np.mean(u)))


def nonlocal_terms(u, cfg, logs=None):
    """``rho1 (h1 e^u / int h1 e^u - 1) - rho2 (h2 e^-u / int h2 e^-u - 1)``."""
    h1, h2 = cfg.weights(u.shape[0])
    a, b = log_masses(u, cfg) if logs is None else logs
    return (cfg.rho1 * (h1 * np.exp(u - a) - 1.0)
            - cfg.rho2 * (h2 * np.exp(-u - b) - 1.0))


def euler_lagrange(u, cfg):
    """L2 gradient of J: ``-lap u - nonlocal_terms(u)``."""
    u = check_field(u)
    return -laplacian(u) - nonlocal_terms(u, cfg)


def elliptic_residual(u, cfg):
    r = euler_lagrange(u, cfg)
    return float(np.sqrt(integrate(r * r)))


def mt_gap(u):
    """``(1/16 pi) int |grad u|^2 - log int e^(u - ubar) - log int e^(ubar - u)``."""
    u = check_field(u)
    v = u - np.mean(u)
    one = np.ones_like(v)
    return dirichlet_energy(v) / EIGHT_PI - log_mass(one, v) - log_mass(one, -v)
