"""Weight-function descriptors for h1 and h2.

A descriptor is a short text such as ``constant 1``,
``gaussian_bump cx=0.5 cy=0.5 sigma=0.1 floor=0.0``, ``cosine_family 0.5 0.5``
or ``clipped_cosine a=0.5 b=1 c=0``.  Parsing is strict so that a config file
fully determines every sampled weight.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .torus import Grid

# kind -> (positional/keyword parameter names, defaults)
_SCHEMA = {
    "constant": (("v",), {"v": 1.0}),
    "gaussian_bump": (("cx", "cy", "sigma", "floor"),
                      {"cx": 0.5, "cy": 0.5, "sigma": 0.1, "floor": 0.0}),
    "cosine_family": (("a", "b"), {"a": 0.0, "b": 0.0}),
    "clipped_cosine": (("a", "b", "c"), {"a": 0.5, "b": 1.0, "c": 0.0}),
}


@dataclass(frozen=True)
class Weight:
    kind: str
    params: tuple  # sorted (name, value) pairs

    def __post_init__(self):
        if self.kind not in _SCHEMA:
            raise ValidationError(f"unknown weight kind {self.kind!r}; "
                                  f"expected one of {sorted(_SCHEMA)}")
        p = dict(self.params)
        if self.kind == "constant" and p["v"] < 0:
            raise ValidationError(f"constant weight must be >= 0, got {p['v']}")
        if self.kind == "gaussian_bump":
            if p["sigma"] <= 0:
                raise ValidationError(f"gaussian_bump sigma must be > 0, got {p['sigma']}")
            if p["floor"] < 0:
                raise ValidationError(f"gaussian_bump floor must be >= 0, got {p['floor']}")

    @property
    def values(self):
        return dict(self.params)

    def __call__(self, x, y):
        """Evaluate at coordinates ``x, y`` (any broadcastable arrays)."""
        p = self.values
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "constant":
            return np.full(np.broadcast(x, y).shape, p["v"])
        if self.kind == "gaussian_bump":
            dx = (x - p["cx"] + 0.5) % 1.0 - 0.5
            dy = (y - p["cy"] + 0.5) % 1.0 - 0.5
            return p["floor"] + np.exp(-(dx**2 + dy**2) / (2 * p["sigma"] ** 2))
        if self.kind == "cosine_family":
            return np.exp(p["a"] * np.cos(2 * np.pi * x) + p["b"] * np.cos(2 * np.pi * y))
        return np.maximum(0.0, p["a"] + p["b"] * np.cos(2 * np.pi * x)
                          + p["c"] * np.cos(2 * np.pi * y))

    def sample(self, grid):
        return grid.sample(self)

    def log_laplacian(self, x, y):
        """Closed-form Laplacian of ``log h`` where available, else None."""
        p = self.values
        if self.kind == "constant":
            return 0.0
        if self.kind == "cosine_family":
            return -4 * np.pi**2 * (p["a"] * np.cos(2 * np.pi * x)
                                    + p["b"] * np.cos(2 * np.pi * y))
        return None

    def describe(self):
        names = _SCHEMA[self.kind][0]
        p = self.values
        if self.kind in ("constant", "cosine_family"):
            return " ".join([self.kind] + [repr(float(p[k])) for k in names])
        return " ".join([self.kind] + [f"{k}={float(p[k])!r}" for k in names])

    def __str__(self):
        return self.describe()


def parse_weight(text):
    """Parse a descriptor string into a :class:`Weight`.

    Parameters may be positional (in schema order) or ``key=value``.
    """
    if isinstance(text, Weight):
        return text
    tokens = str(text).split()
    if not tokens:
        raise ValidationError("empty weight descriptor")
    kind, args = tokens[0], tokens[1:]
    if kind not in _SCHEMA:
        raise ValidationError(f"unknown weight kind {kind!r}; expected one of {sorted(_SCHEMA)}")
    names, defaults = _SCHEMA[kind]
    values = dict(defaults)
    seen = set()
    for pos, tok in enumerate(args):
        if "=" in tok:
            key, _, raw = tok.partition("=")
        elif pos < len(names):
            key, raw = names[pos], tok
        else:
            raise ValidationError(f"too many parameters for {kind}: {text!r}")
        if key not in names:
            raise ValidationError(f"unknown parameter {key!r} for {kind}; expected {list(names)}")
        if key in seen:
            raise ValidationError(f"parameter {key!r} given twice in {text!r}")
        try:
            val = float(raw)
        except ValueError:
            raise ValidationError(f"parameter {key!r} of {kind} is not a number: {raw!r}") from None
        if not np.isfinite(val):
            raise ValidationError(f"parameter {key!r} of {kind} must be finite")
        values[key] = val
        seen.add(key)
    return Weight(kind, tuple(sorted(values.items())))


def sample_weight(spec, n):
    """Sample a descriptor (string, Weight or array) on the ``n`` grid."""
    if isinstance(spec, np.ndarray):
        if spec.shape != (n, n):
            raise ValidationError(f"weight array has shape {spec.shape}, expected {(n, n)}")
        return np.asarray(spec, dtype=float)
    return parse_weight(spec).sample(Grid(n))
