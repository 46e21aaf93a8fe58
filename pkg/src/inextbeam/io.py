"""CSV and JSON persistence.

Floats are written with ``repr`` (shortest round-trip form), so reading a
file back reproduces every value bit for bit.
"""

from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path

import numpy as np

from .fields import SNAPSHOT_COLUMNS, FieldSnapshot
from .integrators import Trajectory

ENERGY_COLUMNS = ("E_kinetic", "E_inertial", "E_bend", "E_nl", "E_total",
                  "dissipation_accum", "work_accum", "identity_residual")


class OutputError(OSError):
    pass


def trajectory_columns(n_modes: int) -> list[str]:
    return (["t"] + [f"q_{j}" for j in range(1, n_modes + 1)]
            + [f"v_{j}" for j in range(1, n_modes + 1)] + list(ENERGY_COLUMNS))


def _fmt(x) -> str:
    return repr(float(x))


def write_table(path, header, rows) -> Path:
    path = Path(path)
    tmp = path.with_name(path.name + ".part")
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    os.replace(tmp, path)
    return path


def write_trajectory_csv(path, traj: Trajectory) -> Path:
    n = traj.q.shape[1]
    cols = [traj.t] + [traj.q[:, j] for j in range(n)] + [traj.v[:, j] for j in range(n)]
    cols += [traj.energies[name] for name in ENERGY_COLUMNS]
    rows = ([_fmt(c[k]) for c in cols] for k in range(traj.t.size))
    return write_table(path, trajectory_columns(n), rows)


def read_csv_columns(path) -> dict[str, np.ndarray]:
    """Columns of a numeric CSV with a header row, as float arrays."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise OutputError(f"{path}: empty file") from None
        data = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise OutputError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                data.append([float(x) for x in row])
            except ValueError as exc:
                raise OutputError(f"{path}:{lineno}: {exc}") from None
    arr = np.array(data, dtype=float).reshape(len(data), len(header))
    return {name: arr[:, i].copy() for i, name in enumerate(header)}


def read_trajectory_csv(path) -> dict[str, np.ndarray]:
    cols = read_csv_columns(path)
    missing = [c for c in ("t", "E_total") if c not in cols]
    if missing:
        raise OutputError(f"{path}: not a trajectory file (missing {', '.join(missing)})")
    return cols


def trajectory_modal_arrays(cols: dict[str, np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    n = sum(1 for name in cols if name.startswith("q_"))
    q = np.column_stack([cols[f"q_{j}"] for j in range(1, n + 1)]) if n else np.zeros((cols["t"].size, 0))
    v = np.column_stack([cols[f"v_{j}"] for j in range(1, n + 1)]) if n else np.zeros((cols["t"].size, 0))
    return q, v


def write_snapshot_csv(path, snap: FieldSnapshot) -> Path:
    cols = snap.columns()
    rows = ([_fmt(cols[name][k]) for name in SNAPSHOT_COLUMNS] for k in range(snap.grid.size))
    return write_table(path, SNAPSHOT_COLUMNS, rows)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True)


def write_json(path, obj) -> Path:
    path = Path(path)
    tmp = path.with_name(path.name + ".part")
    tmp.write_text(dumps_json(obj) + "\n")
    os.replace(tmp, path)
    return path


def ensure_writable_dir(path) -> Path:
    """Create ``path`` if needed and confirm files can be created in it."""
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create output directory {path}: {exc.strerror}") from exc
    if not path.is_dir() or not os.access(path, os.W_OK | os.X_OK):
        raise OutputError(f"output directory {path} is not writable")
    return path
