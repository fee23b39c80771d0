"""Deterministic CSV/JSON emission.

CSV numbers are written with 17 significant digits, which round-trips every
double exactly. JSON uses Python's shortest round-trip float repr with sorted
keys, so identical inputs give byte-identical files.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

FLOAT_FORMAT = ".17g"


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, FLOAT_FORMAT)
    return str(x)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


_BOOL = {"true": 1.0, "false": 0.0}


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Header and numeric body; booleans come back as 1.0/0.0."""
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    body = [[_BOOL[v] if v in _BOOL else float(v) for v in r] for r in rows[1:]]
    return rows[0], np.array(body, dtype=float).reshape(len(body), len(rows[0]))


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        # JSON has no inf/nan literals; keep them readable as strings
        return x if math.isfinite(x) else fmt(x)
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n")
    return path
