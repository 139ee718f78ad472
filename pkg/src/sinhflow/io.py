"""CSV and PGM writers.

Floats are written with ``repr`` so identical runs give identical bytes.
Every CSV ends with a ``# config_hash=... n=...`` comment line.
"""

import os

import numpy as np


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (list, tuple)):
        return ";".join(_cell(x) for x in v)
    return str(v)


def format_csv(header, rows, config_hash, n, extra=()):
    lines = [",".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row has {len(row)} cells, header has {len(header)}")
        lines.append(",".join(_cell(v) for v in row))
    lines.extend(f"# {e}" for e in extra)
    lines.append(f"# config_hash={config_hash} n={n}")
    return "\n".join(lines) + "\n"


def write_csv(path, header, rows, config_hash, n, extra=()):
    text = format_csv(header, rows, config_hash, n, extra)
    _write(path, text)
    return path


def read_csv(path):
    """(header, rows as lists of strings, comment lines)."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    comments = [ln[1:].strip() for ln in lines if ln.startswith("#")]
    data = [ln for ln in lines if ln and not ln.startswith("#")]
    return data[0].split(","), [ln.split(",") for ln in data[1:]], comments


def format_pgm(field, max_side=512):
    """P2 graymap, linearly mapped from [min, max] to [0, 255].

    Fields larger than ``max_side`` are subsampled by an integer stride.
    Non-finite values are drawn black.
    """
    f = np.asarray(field, dtype=float)
    stride = max(1, -(-max(f.shape) // max_side))
    f = f[::stride, ::stride]
    finite = np.isfinite(f)
    lo = float(f[finite].min()) if finite.any() else 0.0
    hi = float(f[finite].max()) if finite.any() else 0.0
    span = hi - lo if hi > lo else 1.0
    img = np.where(finite, np.rint((f - lo) / span * 255), 0).astype(int)
    # rows of the image run along y, top row is the largest y
    img = img.T[::-1]
    out = ["P2", f"# min={lo!r} max={hi!r} stride={stride}", f"{img.shape[1]} {img.shape[0]}", "255"]
    out.extend(" ".join(map(str, row)) for row in img)
    return "\n".join(out) + "\n"


def write_pgm(path, field, max_side=512):
    _write(path, format_pgm(field, max_side))
    return path


def _write(path, text):
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
