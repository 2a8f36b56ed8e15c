"""Time grids and functions sampled on them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_REL_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing times ``0 = u_0 < ... < u_N = T`` with ``N >= 2``."""

    points: np.ndarray

    def __post_init__(self) -> None:
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 3:
            raise ValueError("a grid needs at least 3 points (N >= 2 cells)")
        if not np.all(np.isfinite(pts)):
            raise ValueError("grid points must be finite")
        if pts[0] != 0.0:
            raise ValueError(f"grid must start at 0, got {pts[0]}")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, horizon: float, n_cells: int) -> "TimeGrid":
        if horizon <= 0:
            raise ValueError(f"horizon must be positive, got {horizon}")
        if n_cells < 2:
            raise ValueError(f"need at least 2 cells, got {n_cells}")
        return cls(np.linspace(0.0, float(horizon), int(n_cells) + 1))

    @property
    def horizon(self) -> float:
        return float(self.points[-1])

    @property
    def n_cells(self) -> int:
        return self.points.size - 1

    def __len__(self) -> int:
        return self.points.size

    @property
    def is_uniform(self) -> bool:
        d = np.diff(self.points)
        return bool(np.allclose(d, d[0], rtol=1e-9, atol=0.0))

    @property
    def step(self) -> float:
        if not self.is_uniform:
            raise ValueError("step is only defined for uniform grids")
        return self.horizon / self.n_cells

    @property
    def key(self) -> tuple:
        return (self.points.size, self.horizon, hash(self.points.tobytes()))

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimeGrid):
            return NotImplemented
        return self.points.size == other.points.size and bool(
            np.array_equal(self.points, other.points)
        )

    def __hash__(self) -> int:
        return hash(self.key)

    def index(self, t: float) -> int:
        """Index of the grid point equal to ``t`` (up to rounding)."""
        i = int(np.searchsorted(self.points, t))
        tol = _REL_TOL * max(1.0, self.horizon)
        for j in (i - 1, i):
            if 0 <= j < self.points.size and abs(self.points[j] - t) <= tol:
                return j
        raise ValueError(f"time {t} is not a grid point")

    def index_at_or_after(self, t: float) -> int:
        """First grid index whose time is >= ``t`` (rounding-tolerant); clipped to N."""
        tol = _REL_TOL * max(1.0, self.horizon)
        i = int(np.searchsorted(self.points, t - tol, side="left"))
        return min(i, self.n_cells)

    def coarsen(self, factor: int) -> "TimeGrid":
        if factor < 1 or self.n_cells % factor:
            raise ValueError(f"cannot coarsen {self.n_cells} cells by {factor}")
        return TimeGrid(self.points[::factor])

    def restrict(self, t: float) -> "TimeGrid":
        """The grid truncated at the grid point ``t``."""
        return TimeGrid(self.points[: self.index(t) + 1])


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real values attached to the points of a grid."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=float)
        if vals.shape != (len(self.grid),):
            raise ValueError(
                f"expected {len(self.grid)} values for the grid, got shape {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def times(self) -> np.ndarray:
        return self.grid.points

    def __call__(self, t: float) -> float:
        return float(self.values[self.grid.index(t)])

    def restrict(self, t: float) -> "GridFunction":
        k = self.grid.index(t)
        return GridFunction(TimeGrid(self.grid.points[: k + 1]), self.values[: k + 1])

    def coarsen(self, factor: int) -> "GridFunction":
        return GridFunction(self.grid.coarsen(factor), self.values[::factor])

    @classmethod
    def from_callable(cls, grid: TimeGrid, func) -> "GridFunction":
        return cls(grid, np.asarray(func(grid.points), dtype=float) * np.ones(len(grid)))
