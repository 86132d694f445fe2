"""Serialization helpers: shortest round-trip floats, strict JSON, two-column CSV."""
from __future__ import annotations

import dataclasses
import json
import math

import numpy as np


def fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def jsonable(obj):
    """Recursively convert reports to JSON-safe values; non-finite floats become strings."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return [[fmt_num(z.real), fmt_num(z.imag)] for z in obj]
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return fmt_num(obj)
    if isinstance(obj, complex):
        return [fmt_num(obj.real), fmt_num(obj.imag)]
    return obj


def fmt_num(x):
    x = float(x)
    return x if math.isfinite(x) else fmt(x)


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def csv_table(header: tuple[str, str], rows) -> str:
    lines = [",".join(header)]
    lines += [f"{fmt(a) if isinstance(a, float) else a},{fmt(b)}" for a, b in rows]
    return "\n".join(lines) + "\n"


def state_pairs(psi) -> list[list[float]]:
    """A complex state as a list of (re, im) pairs."""
    return [[float(z.real), float(z.imag)] for z in np.asarray(psi, dtype=complex)]
