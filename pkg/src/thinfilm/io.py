"""Output formats: ledger CSV, snapshot tables, JSON reports.  All writes are atomic."""
from __future__ import annotations

import json
import math
import os
import tempfile
from fractions import Fraction
from pathlib import Path

import numpy as np

LEDGER_COLUMNS = ("t", "mass", "energy", "entropy", "alpha_entropy", "hx_sq", "sup", "moment",
                  "B1", "B2", "Btilde", "x_left", "x_right")


def fmt(x) -> str:
    """Shortest decimal string that reads back to the same double."""
    return repr(float(x))


def fmt_exact(x) -> str:
    """Like ``fmt`` but integers print without a trailing ``.0``."""
    if isinstance(x, Fraction) and x.denominator == 1:
        return str(x.numerator)
    f = float(x)
    if math.isfinite(f) and f == int(f):
        return str(int(f))
    return repr(f)


def atomic_write(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def write_csv(path, header, rows) -> Path:
    return atomic_write(path, csv_text(header, rows))


def ledger_rows(ledger):
    for s, (xl, xr) in zip(ledger.samples, ledger.support):
        yield [s.t, s.mass, s.energy, s.entropy, s.alpha_entropy, s.hx_sq, s.sup, s.moment,
               s.B1, s.B2, s.Btilde, xl, xr]


def write_ledger_csv(path, ledger) -> Path:
    return write_csv(path, LEDGER_COLUMNS, ledger_rows(ledger))


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def snapshot_text(x: np.ndarray, h: np.ndarray, meta: dict) -> str:
    head = " ".join(f"{k}={fmt(v)}" for k, v in meta.items())
    lines = [f"# {head}", "# x h"]
    lines += [f"{fmt(a)} {fmt(b)}" for a, b in zip(x, h)]
    return "\n".join(lines) + "\n"


def write_snapshot(path, x, h, p, t: float, dx: float) -> Path:
    meta = {"n": p.n, "m": p.m, "a0": p.a0, "a1": p.a1, "t": t, "dx": dx}
    return atomic_write(path, snapshot_text(x, h, meta))


def read_snapshot(path) -> tuple[dict, np.ndarray, np.ndarray]:
    meta = {}
    with open(path) as fh:
        first = fh.readline()
    if first.startswith("#"):
        for tok in first[1:].split():
            if "=" in tok:
                k, v = tok.split("=", 1)
                meta[k] = float(v)
    data = np.loadtxt(path, comments="#", ndmin=2)
    if data.shape[1] != 2:
        raise ValueError(f"snapshot {path} must have two columns (x h)")
    return meta, data[:, 0], data[:, 1]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        # JSON has no NaN/inf; null keeps the document standard and round-trippable
        return f if math.isfinite(f) else None
    if isinstance(obj, Fraction):
        return float(obj)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def report_text(report: dict) -> str:
    return json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"


def write_report(path, report: dict) -> Path:
    return atomic_write(path, report_text(report))


def read_report(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
