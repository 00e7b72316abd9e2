"""Serialization of audit artifacts (CSV for plotting, JSON for the full record)."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import asdict, is_dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .audit import CurvePoint

CURVE_COLUMNS = ("center_group", "quantile", "metric", "mean", "ci_low", "ci_high")
SWEEP_COLUMNS = ("alpha", "metric", "mean", "ci_low", "ci_high", "n")
BOX_COLUMNS = ("seed", "group", "n", "mean", "q1", "median", "q3", "whisker_low", "whisker_high", "n_outliers")


def fmt(value) -> str:
    """Fixed 9-significant-digit text; empty for absent values."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".9g")


def _jsonable(obj):
    if is_dataclass(obj) and not isinstance(obj, type):
        return _jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if math.isfinite(f):
            return f
        return "inf" if f > 0 else ("-inf" if f < 0 else "nan")
    if isinstance(obj, Path):
        return str(obj)
    return obj


def json_text(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def _csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])
    return buf.getvalue()


def curves_csv_text(curves: Sequence[CurvePoint]) -> str:
    return _csv_text(CURVE_COLUMNS, (
        (p.center_group, p.quantile, p.metric, p.mean, p.ci_low, p.ci_high) for p in curves
    ))


def sweep_csv_text(rows) -> str:
    return _csv_text(SWEEP_COLUMNS, ((r.alpha, r.metric, r.mean, r.ci_low, r.ci_high, r.n) for r in rows))


def boxes_csv_text(result: dict) -> str:
    out = []
    for run in result["runs"]:
        for group, box in run["boxes"].items():
            if box is None:
                out.append((run["seed"], group, 0, None, None, None, None, None, None, 0))
            else:
                out.append((run["seed"], group, box["n"], box["mean"], box["q1"], box["median"], box["q3"],
                            box["whisker_low"], box["whisker_high"], len(box["outliers"])))
    return _csv_text(BOX_COLUMNS, out)


def read_csv(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def check_csv(text: str, columns: Sequence[str], n_rows: int | None = None) -> None:
    """Raise ``ValueError`` unless ``text`` has the expected header and parseable numbers."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != tuple(columns):
        raise ValueError(f"bad CSV header {rows[0] if rows else None}")
    body = rows[1:]
    if n_rows is not None and len(body) != n_rows:
        raise ValueError(f"expected {n_rows} rows, found {len(body)}")
    for row in body:
        if len(row) != len(columns):
            raise ValueError(f"row has {len(row)} fields: {row}")
        for col, cell in zip(columns, row):
            if col in ("center_group", "metric", "group") or cell == "":
                continue
            float(cell)


def write_atomic(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
