"""Versioned CSV files: result tables, trajectories, and driver replays."""
import csv
from pathlib import Path

import numpy as np

from ..errors import ConfigError, DimensionError
from ..rough_path import GridRoughPath

CSV_HEADER = "# roughmill-csv v1"


def format_cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def write_csv(path, columns, rows, meta=None):
    """Write a table with the version header and optional ``# key=value`` lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        for k, v in (meta or {}).items():
            fh.write(f"# {k}={format_cell(v)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([format_cell(v) for v in row])
    return path


def read_csv(path):
    """Return ``(columns, float array, meta)``; non-numeric cells become NaN."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != CSV_HEADER:
        raise ConfigError(f"{path}: missing '{CSV_HEADER}' header")
    meta = {}
    body = []
    for line in lines[1:]:
        if line.startswith("#"):
            if "=" in line:
                k, v = line[1:].strip().split("=", 1)
                meta[k] = v
        elif line.strip():
            body.append(line)
    reader = list(csv.reader(body))
    columns = reader[0]

    def num(s):
        try:
            return float(s)
        except ValueError:
            return np.nan

    data = np.array([[num(c) for c in row] for row in reader[1:]], dtype=float).reshape(-1, len(columns))
    return columns, data, meta


def write_trajectory(path, times, values, prefix="x"):
    """One row per time: ``time, prefix_1, ..., prefix_n``."""
    values = np.asarray(values)
    cols = ["time"] + [f"{prefix}_{n + 1}" for n in range(values.shape[-1])]
    return write_csv(path, cols, (np.concatenate([[t], v]) for t, v in zip(times, values)))


def write_driver(path, path_obj, micro_dW=None, micro_per_macro=None):
    """Replay file for one B lift: time, path values, and the area of the step ending there.

    Values (not increments) are stored so the replayed increments match bit
    for bit.  Micro-grid W increments go to a sibling ``<stem>_w.csv``.
    """
    d = path_obj.dim
    cols = ["time"] + [f"B_{i}" for i in range(d)] + [f"BB_{i}_{j}" for i in range(d) for j in range(d)]
    areas = np.concatenate([np.zeros((1, d * d)), path_obj.step_areas.reshape(-1, d * d)])
    rows = np.column_stack([path_obj.times, path_obj.values, areas])
    out = write_csv(path, cols, rows, meta={"kind": "driver-B", "dim": d})
    if micro_dW is not None:
        micro_dW = np.asarray(micro_dW)
        wpath = Path(path).with_name(Path(path).stem + "_w.csv")
        write_csv(wpath, [f"dW_{j}" for j in range(micro_dW.shape[-1])], micro_dW,
                  meta={"kind": "driver-W", "micro_per_macro": micro_per_macro})
    return out


def read_driver(path):
    """Inverse of ``write_driver``: returns ``(GridRoughPath, dW or None, micro_per_macro)``."""
    cols, data, meta = read_csv(path)
    if meta.get("kind") != "driver-B":
        raise ConfigError(f"{path}: not a driver-B replay file")
    d = int(meta["dim"])
    if data.shape[1] != 1 + d + d * d:
        raise DimensionError(f"{path}: expected {1 + d + d * d} columns, found {data.shape[1]}")
    b = GridRoughPath(data[:, 0], data[:, 1:1 + d], data[1:, 1 + d:].reshape(-1, d, d))
    wpath = Path(path).with_name(Path(path).stem + "_w.csv")
    if wpath.exists():
        _, dw, wmeta = read_csv(wpath)
        return b, dw, int(wmeta["micro_per_macro"])
    return b, None, None
