"""Bit-stable JSON and CSV writers."""

import csv
import json
import math
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np

FLOAT_FMT = "%.17g"
TRAJECTORY_COLUMNS_1D = ("k", "t", "node", "x", "y", "w", "gap_integrand")
TRAJECTORY_COLUMNS_2D = ("k", "t", "node", "x", "ycoord", "y", "w", "gap_integrand")


def to_jsonable(obj):
    """Plain JSON types; non-finite floats become the strings ``inf``, ``-inf``, ``nan``."""
    if is_dataclass(obj) and not isinstance(obj, type):
        obj = asdict(obj)
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj), encoding="utf-8")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return FLOAT_FMT % float(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([_fmt(v) if not isinstance(v, str) else v for v in row])


def trajectory_rows(traj, data, gap):
    """Rows ``(k, t, node, x[, ycoord], y, w, gap)``; ``w`` and the gap are blank at ``k = 0``."""
    coords = data.grid.coords
    for k in range(traj.K + 1):
        t = k * data.dt
        for i in range(data.grid.n_nodes):
            w = traj.w[k - 1, i] if k > 0 else None
            gi = gap[k - 1, i] if k > 0 else None
            yield (k, t, i, *coords[i], traj.y[k, i], w, gi)


def write_trajectory(path, traj, data, gap):
    header = TRAJECTORY_COLUMNS_1D if data.grid.dim == 1 else TRAJECTORY_COLUMNS_2D
    write_csv(path, header, trajectory_rows(traj, data, gap))
