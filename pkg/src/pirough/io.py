"""CSV path input and deterministic JSON output."""

from __future__ import annotations

import csv
import json
import math
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import PiRoughError
from .path import SampledPath


class InputError(PiRoughError, OSError):
    """A file is missing, unreadable or malformed."""


def read_csv_path(path) -> SampledPath:
    """Read ``t,x1,...,xD`` rows into a :class:`SampledPath`."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise InputError(f"{path} is empty")
    header = [c.strip() for c in rows[0]]
    if len(header) < 2 or header[0] != "t":
        raise InputError(f"{path}: header must be 't,x1,...,xD'")
    body = rows[1:]
    if len(body) < 2:
        raise InputError(f"{path}: need at least two samples")
    try:
        data = np.array([[float(c) for c in r] for r in body])
    except ValueError as exc:
        raise InputError(f"{path}: non-numeric entry ({exc})") from exc
    if data.ndim != 2 or data.shape[1] != len(header):
        raise InputError(f"{path}: every row needs {len(header)} columns")
    if not np.all(np.isfinite(data)):
        raise InputError(f"{path}: non-finite entry")
    try:
        return SampledPath(data[:, 0], data[:, 1:])
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc


def write_csv_path(path, sp: SampledPath):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{j + 1}" for j in range(sp.dim)])
        for t, row in zip(sp.times, sp.values):
            w.writerow([_num(float(t))] + [_num(float(v)) for v in row])


def read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc


def _num(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def dumps(obj, indent: int = 1) -> str:
    """JSON text with every float at 17 significant digits.

    Key order is preserved, so equal inputs give byte-identical output.
    """
    pad = " " * indent if indent else ""

    def enc(o, depth):
        if o is None or isinstance(o, (bool, np.bool_)):
            return json.dumps(None if o is None else bool(o))
        if isinstance(o, (int, np.integer)):
            return str(int(o))
        if isinstance(o, (float, np.floating)):
            return _num(float(o))
        if isinstance(o, Fraction):
            return json.dumps(str(o))
        if isinstance(o, str):
            return json.dumps(o)
        if isinstance(o, np.ndarray):
            o = o.tolist()
        nl = "\n" + pad * (depth + 1) if indent else ""
        end = "\n" + pad * depth if indent else ""
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f"{nl}{json.dumps(str(k))}: {enc(v, depth + 1)}" for k, v in o.items()]
            return "{" + ",".join(items) + end + "}"
        if isinstance(o, (list, tuple)):
            if not o:
                return "[]"
            if not _has_dict(o):
                flat = "[" + ", ".join(enc(v, -1) if indent else enc(v, depth + 1) for v in o) + "]"
                if "\n" not in flat and (len(flat) <= 100 or not any(isinstance(v, (list, tuple)) for v in o)):
                    return flat
            return "[" + ",".join(f"{nl}{enc(v, depth + 1)}" for v in o) + end + "]"
        raise TypeError(f"cannot serialise {type(o).__name__}")

    return enc(obj, 0) + "\n"


def _has_dict(o) -> bool:
    if isinstance(o, dict):
        return True
    if isinstance(o, (list, tuple)):
        return any(_has_dict(v) for v in o)
    return False


def write_json(path, obj):
    text = dumps(obj)
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc
