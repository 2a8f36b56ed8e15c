"""Reading and writing paths, trajectories, kernels, configs and run summaries."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import yaml

from .gp_sim import PathBatch, StationaryGeneric
from .grid import GridFunction, TimeGrid
from .pathwise import IntegralTrajectory


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_batch(path, batch: PathBatch) -> Path:
    """One row per grid time, one column per path (columns named by path index)."""
    header = ["time"] + [f"path_{i}" for i in batch.indices]
    rows = (
        [t, *batch.values[:, k]] for k, t in enumerate(batch.grid.points)
    )
    return write_csv(path, header, rows)


def read_batch(path) -> tuple[TimeGrid, np.ndarray]:
    _, rows = read_csv(path)
    data = np.array(rows, dtype=float)
    return TimeGrid(data[:, 0]), data[:, 1:].T


def write_grid_function(path, f: GridFunction, name: str = "value") -> Path:
    return write_csv(path, ["time", name], zip(f.grid.points, f.values))


def read_grid_function(path) -> GridFunction:
    _, rows = read_csv(path)
    data = np.array(rows, dtype=float)
    return GridFunction(TimeGrid(data[:, 0]), data[:, 1])


def write_trajectory(path, traj: IntegralTrajectory) -> Path:
    return write_csv(
        path,
        ["time", "value", "segment", "active"],
        zip(traj.times, traj.value, traj.segment, traj.active),
    )


def read_kernel_table(path, exponent: float = 0.75, name: str | None = None) -> StationaryGeneric:
    """Stationary covariance ``r(lag)`` from a two-column CSV ``lag,value``."""
    _, rows = read_csv(path)
    data = np.array(rows, dtype=float)
    return StationaryGeneric.from_table(data[:, 0], data[:, 1], exponent, name or Path(path).stem)


def load_config(path) -> dict:
    """YAML or JSON mapping (JSON is valid YAML)."""
    with Path(path).open() as fh:
        cfg = yaml.safe_load(fh) or {}
    if not isinstance(cfg, dict):
        raise ValueError(f"config {path} must be a mapping")
    return cfg


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    return obj


def write_summary(path, summary: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_plain(summary), indent=2, sort_keys=True) + "\n")
    return path
