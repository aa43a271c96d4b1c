"""CSV/JSON readers and writers with locale-free, round-trip number formatting."""
from __future__ import annotations

import csv
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .curves import SampledCurve
from .errors import InputError


def fmt(x) -> str:
    """17 significant digits, '.' decimal point."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def _atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows):
    from io import StringIO

    buf = StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    _atomic_write(path, buf.getvalue())


def _default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, default=_default, indent=2, sort_keys=True) + "\n"


def write_json(path, obj):
    _atomic_write(path, dumps(obj))


def read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read JSON from {path}: {exc}") from exc


def curve_rows(curve: SampledCurve):
    return [[t, *p] for t, p in zip(curve.times, curve.points)]


def write_curve(path, curve: SampledCurve):
    header = ["t"] + [f"x{i + 1}" for i in range(curve.dim)]
    write_csv(path, header, curve_rows(curve))


def read_curve(path) -> SampledCurve:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"cannot read curve from {path}: {exc}") from exc
    if not rows or rows[0][0] != "t":
        raise InputError("curve CSV must have header t,x1,...,xd")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]])
    except ValueError as exc:
        raise InputError(f"bad number in curve CSV: {exc}") from exc
    if data.ndim != 2 or data.shape[1] != len(rows[0]):
        raise InputError("ragged curve CSV")
    return SampledCurve(data[:, 0], data[:, 1:])


def write_trajectory(path, tr):
    d = tr.points.shape[1]
    header = ["t"] + [f"x{i + 1}" for i in range(d)] + ["speed", "phi", "psi_term", "psistar_term"]
    rows = [
        [t, *x, s, ph, a, b]
        for t, x, s, ph, a, b in zip(tr.times, tr.points, tr.speed, tr.phi, tr.psi_term, tr.psistar_term)
    ]
    write_csv(path, header, rows)
