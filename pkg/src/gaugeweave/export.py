"""CSV and JSON writers with byte-stable formatting."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

FLOAT_FORMAT = ".17g"


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x) + 0.0  # folds -0.0 into 0.0
    if math.isnan(x):
        return "nan"
    return format(x, FLOAT_FORMAT)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def complex_columns(name: str, n: int) -> list[str]:
    if n == 1:
        return [f"{name}_re", f"{name}_im"]
    cols = []
    for m in range(n):
        cols += [f"{name}{m}_re", f"{name}{m}_im"]
    return cols


def field_rows(grid, arrays: dict, mask=None):
    """Header and rows for complex vector fields sampled on ``grid``.

    ``arrays`` maps a column prefix to an array of shape ``(*grid.shape, N)``
    or ``grid.shape``.
    """
    N = grid.n_dims
    header = [f"i{m}" for m in range(N)] + [f"R{m}" for m in range(N)]
    flat = {}
    for name, arr in arrays.items():
        a = np.asarray(arr)
        if a.shape == grid.shape:
            a = a[..., None]
        flat[name] = a.reshape(grid.size, -1)
        header += complex_columns(name, flat[name].shape[1])
    if mask is not None:
        header.append("masked")
    coords = grid.coords().reshape(grid.size, N)
    rows = []
    for p, idx in enumerate(np.ndindex(*grid.shape)):
        row = list(idx) + list(coords[p])
        for a in flat.values():
            for z in a[p]:
                row += [np.real(z), np.imag(z)]
        if mask is not None:
            row.append(bool(np.asarray(mask).reshape(-1)[p]))
        rows.append(row)
    return header, rows


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return None if (math.isnan(x) or math.isinf(x)) else x
    if isinstance(obj, complex):
        return [_clean(obj.real), _clean(obj.imag)]
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj), encoding="ascii")
    return path


def config_hash(obj) -> str:
    canon = json.dumps(_clean(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()
