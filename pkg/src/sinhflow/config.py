"""Line-oriented experiment configuration.

Format: UTF-8 lines ``key = value``; ``#`` starts a comment.  Lists are
whitespace or comma separated.  Every error names the key and the line.
"""

from dataclasses import dataclass, fields, replace
import hashlib

import numpy as np

from .energy import EIGHT_PI, FlowConfig
from .errors import ValidationError
from .weights import parse_weight, sample_weight


class ConfigError(ValidationError):
    def __init__(self, key, line, message):
        self.key = key
        self.line = line
        where = f"line {line}: " if line else ""
        super().__init__(f"{where}{key}: {message}")


U0_KINDS = ("zero", "cosine", "random", "bubble", "test_function")


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 128
    rho1: float = EIGHT_PI
    rho2: float = 4 * np.pi
    h1: str = "constant 1.0"
    h2: str = "constant 1.0"
    dt_init: float = 1e-4
    dt_max: float = 0.1
    t_end: float = 1.0
    tol_mass: float = 1e-6
    tol_energy: float = None
    tol_mfe: float = 1e-8
    eps_list: tuple = (4e-4, 3e-4, 1e-4, 3e-5, 1e-5)
    delta_list: tuple = (0.05, 0.1, 0.2)
    p_resolution: int = 4
    out_dir: str = "out"
    seed: int = 0
    # extensions beyond the core keys
    u0: str = "cosine 1.0"
    p: tuple = (0.5, 0.5)
    barrier_n: int = 0
    cutoff: str = "quintic"
    preconditioner: str = "spectral"
    sample_every: int = 10
    stop_residual: float = 0.0

    def flow_config(self):
        return FlowConfig(rho1=self.rho1, rho2=self.rho2, h1=self.h1, h2=self.h2,
                          dt_init=self.dt_init, dt_max=self.dt_max, t_end=self.t_end,
                          tol_mass=self.tol_mass, tol_energy=self.tol_energy,
                          tol_mfe=self.tol_mfe, preconditioner=self.preconditioner)

    def to_text(self):
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {_format(v)}")
        return "\n".join(lines) + "\n"

    def digest(self):
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]


def _format(v):
    if v is None:
        return "auto"
    if isinstance(v, tuple):
        return " ".join(_format(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _to_float(raw):
    v = float(raw)
    if not np.isfinite(v):
        raise ValueError("not finite")
    return v


def _to_int(raw):
    v = float(raw)
    if v != int(v):
        raise ValueError("not an integer")
    return int(v)


def _floats(raw):
    items = raw.replace(",", " ").split()
    if not items:
        raise ValueError("empty list")
    return tuple(_to_float(x) for x in items)


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}
_PARSERS = {
    "n": _to_int, "p_resolution": _to_int, "seed": _to_int, "barrier_n": _to_int,
    "sample_every": _to_int, "eps_list": _floats, "delta_list": _floats, "p": _floats,
    "h1": lambda s: str(parse_weight(s)), "h2": lambda s: str(parse_weight(s)),
    "out_dir": str, "cutoff": str, "preconditioner": str, "u0": str,
    "tol_energy": lambda s: None if s.strip() == "auto" else _to_float(s),
}


def _check(cfg, key, line):
    def fail(msg):
        raise ConfigError(key, line, msg)

    v = getattr(cfg, key)
    if key == "n" and (v < 16 or v & (v - 1)):
        fail(f"grid size must be a power of two >= 16, got {v}")
    if key == "rho2" and not 0 < v < EIGHT_PI:
        fail(f"must lie in (0, 8*pi) = (0, {EIGHT_PI:.6f}), got {v}")
    if key == "rho1" and not 0 < v <= EIGHT_PI * (1 + 1e-15):
        fail(f"must lie in (0, 8*pi], got {v}")
    if key in ("dt_init", "dt_max", "t_end", "tol_mass", "tol_mfe") and not v > 0:
        fail(f"must be positive, got {v}")
    if key == "tol_energy" and v is not None and v < 0:
        fail(f"must be >= 0 or auto, got {v}")
    if key == "eps_list" and any(not 0 < e < np.exp(-np.e) for e in v):
        fail(f"every epsilon must lie in (0, e^-e), got {v}")
    if key == "delta_list" and any(not 0 < d < 0.5 for d in v):
        fail(f"every delta must lie in (0, 1/2), got {v}")
    if key == "p_resolution" and (v < 4 or cfg.n % v):
        fail(f"must be >= 4 and divide n = {cfg.n}, got {v}")
    if key == "p" and len(v) != 2:
        fail(f"expected two coordinates, got {v}")
    if key == "barrier_n" and v and (v < 16 or v & (v - 1)):
        fail(f"must be 0 (auto) or a power of two >= 16, got {v}")
    if key == "cutoff" and v not in ("quintic", "cubic", "smooth"):
        fail(f"must be quintic, cubic or smooth, got {v!r}")
    if key == "preconditioner" and v not in ("spectral", "plain", "amg"):
        fail(f"must be spectral, plain or amg, got {v!r}")
    if key == "sample_every" and v < 1:
        fail(f"must be >= 1, got {v}")
    if key == "stop_residual" and v < 0:
        fail(f"must be >= 0, got {v}")
    if key == "u0":
        kind = v.split()[0] if v.split() else ""
        if kind not in U0_KINDS:
            fail(f"initial data must be one of {U0_KINDS}, got {v!r}")
    if key in ("h1", "h2"):
        h = sample_weight(v, cfg.n)
        if np.any(h < 0):
            fail("weight must be non-negative on the grid")


def parse_config(text, base=None):
    """Parse ``key = value`` text into a validated :class:`ExperimentConfig`."""
    cfg = base or ExperimentConfig()
    where = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(line.split()[0], lineno, "expected 'key = value'")
        key, _, value = (s.strip() for s in line.partition("="))
        if key not in _FIELDS:
            raise ConfigError(key, lineno, "unknown key")
        if key in where:
            raise ConfigError(key, lineno, f"duplicate key (first set on line {where[key]})")
        parser = _PARSERS.get(key, _to_float)
        try:
            val = parser(value)
        except ValidationError as exc:
            raise ConfigError(key, lineno, str(exc)) from None
        except ValueError:
            raise ConfigError(key, lineno, f"cannot parse {value!r}") from None
        cfg = replace(cfg, **{key: val})
        where[key] = lineno
    for key in _FIELDS:
        _check(cfg, key, where.get(key))
    if cfg.dt_init > cfg.dt_max:
        raise ConfigError("dt_init", where.get("dt_init"), f"{cfg.dt_init} exceeds dt_max {cfg.dt_max}")
    h1 = sample_weight(cfg.h1, cfg.n)
    h2 = sample_weight(cfg.h2, cfg.n)
    if not np.any(h1 * h2 > 0):
        key = "h2" if "h2" in where else "h1"
        raise ConfigError(key, where.get(key), "h1*h2 vanishes identically on the grid")
    return cfg


def load_config(path=None, overrides=()):
    """Read a config file (or defaults) and apply ``key=value`` overrides."""
    cfg = ExperimentConfig()
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            cfg = parse_config(fh.read())
    if overrides:
        cfg = parse_config("\n".join(overrides), base=cfg)
    return cfg
