"""Pathwise integration: forward sums, step integrands and the Itô formula check.

All integrals against a sample path are forward (left-point) Riemann-Stieltjes
sums on the path's grid.  For piecewise integrands whose breakpoints lie on the
grid this is the exact evaluation of the construction; for general adapted
integrands it is the finest level of the Föllmer limit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gp_sim import GENERIC, CovarianceModel
from .grid import GridFunction, TimeGrid

RULE_KINDS = ("constant", "power_sign", "scaled_sign")


def f_eta(x, eta: float):
    """Derivative of ``|x|^(1+eta)``: ``(1+eta) |x|^eta sign(x)``."""
    x = np.asarray(x, dtype=float)
    return (1.0 + eta) * np.abs(x) ** eta * np.sign(x)


@dataclass(frozen=True)
class Segment:
    """Value rule on grid cells ``start <= k < end``; zero from ``stop`` on.

    Sign-type rules are scaled by ``multiplier * sign``.
    ``stop`` is the grid index of the segment's stopping time, ``end`` when the
    stop was never triggered.
    """

    start: int
    end: int
    kind: str = "constant"
    value: float = 0.0
    eta: float = 1.0
    anchor: int = 0
    multiplier: float = 1.0
    sign: float = 1.0
    stop: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in RULE_KINDS:
            raise ValueError(f"unknown rule {self.kind!r}; expected one of {RULE_KINDS}")
        if not 0 <= self.start <= self.end:
            raise ValueError(f"bad segment bounds [{self.start}, {self.end})")
        if self.stop is None:
            object.__setattr__(self, "stop", self.end)
        if not self.start <= self.stop <= self.end:
            raise ValueError(f"stop {self.stop} outside [{self.start}, {self.end}]")
        if self.kind != "constant" and self.anchor > self.start:
            # the rule may only look at path values already observed
            raise ValueError("anchor must not lie after the segment start")

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Integrand values at the active cells' left endpoints."""
        n = self.stop - self.start
        if self.kind == "constant":
            return np.full(n, float(self.value))
        incr = x[self.start : self.stop] - x[self.anchor]
        scale = self.multiplier * self.sign
        if self.kind == "power_sign":
            return scale * f_eta(incr, self.eta)
        return scale * np.sign(incr)


@dataclass(frozen=True)
class StepIntegrand:
    """Piecewise integrand on a grid; segments tile the cells ``0 .. N-1``."""

    grid: TimeGrid
    segments: tuple[Segment, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        segs = tuple(sorted(self.segments, key=lambda s: s.start))
        pos = 0
        for s in segs:
            if s.start != pos:
                raise ValueError(f"segments must tile the grid; gap or overlap at cell {pos}")
            pos = s.end
        if pos != self.grid.n_cells:
            raise ValueError(f"segments cover {pos} of {self.grid.n_cells} cells")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def build(cls, grid: TimeGrid, segments) -> "StepIntegrand":
        """Assemble from possibly sparse segments, filling gaps with zero."""
        out = []
        pos = 0
        for s in sorted(segments, key=lambda s: s.start):
            if s.start > pos:
                out.append(Segment(pos, s.start))
            out.append(s)
            pos = s.end
        if pos < grid.n_cells:
            out.append(Segment(pos, grid.n_cells))
        return cls(grid, tuple(out))

    @classmethod
    def zero(cls, grid: TimeGrid) -> "StepIntegrand":
        return cls(grid, (Segment(0, grid.n_cells),))

    @classmethod
    def constant(cls, grid: TimeGrid, c: float) -> "StepIntegrand":
        return cls(grid, (Segment(0, grid.n_cells, "constant", value=c),))

    def values(self, path: GridFunction) -> np.ndarray:
        """Integrand at the left endpoint of every cell (length ``N``)."""
        self._check(path)
        x = path.values
        out = np.zeros(self.grid.n_cells)
        for s in self.segments:
            out[s.start : s.stop] = s.evaluate(x)
        if not np.all(np.isfinite(out)):
            raise FloatingPointError("integrand is not finite on this path")
        return out

    def segment_index(self) -> np.ndarray:
        idx = np.empty(self.grid.n_cells, dtype=int)
        for i, s in enumerate(self.segments):
            idx[s.start : s.end] = i
        return idx

    def active(self) -> np.ndarray:
        flag = np.zeros(self.grid.n_cells, dtype=bool)
        for s in self.segments:
            flag[s.start : s.stop] = True
        return flag

    def _check(self, path: GridFunction) -> None:
        if path.grid != self.grid:
            raise ValueError("integrand and path live on different grids")


def running_integral(phi: StepIntegrand, X: GridFunction) -> np.ndarray:
    """``int_0^{u_k} phi dX`` for every grid index ``k`` (starts at 0)."""
    out = np.zeros(len(X.grid))
    np.cumsum(phi.values(X) * np.diff(X.values), out=out[1:])
    return out


def integrate_step(phi: StepIntegrand, X: GridFunction, t: float | None = None, s: float = 0.0) -> float:
    """Forward sum of ``phi`` against ``X`` over ``[s, t]`` (grid points, ``t`` defaults to T)."""
    k = X.grid.n_cells if t is None else X.grid.index(t)
    run = running_integral(phi, X)
    return float(run[k] - run[X.grid.index(s)]) if s else float(run[k])


@dataclass(frozen=True)
class IntegralTrajectory:
    times: np.ndarray
    value: np.ndarray
    segment: np.ndarray
    active: np.ndarray


def trajectory(phi: StepIntegrand, X: GridFunction) -> IntegralTrajectory:
    """Running integral with segment index and active flag (last point repeats)."""
    seg = phi.segment_index()
    act = phi.active()
    return IntegralTrajectory(
        X.grid.points.copy(),
        running_integral(phi, X),
        np.append(seg, seg[-1]),
        np.append(act, act[-1]),
    )


# ---------------------------------------------------------------------------
# Föllmer integral
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FollmerResult:
    value: float
    partial_sums: tuple[float, ...]  # coarsest level first, finest last
    converged: bool
    gap: float
    tol: float


def forward_sum(y: np.ndarray, x: np.ndarray) -> float:
    return float(np.dot(y[:-1], np.diff(x)))


def follmer_integral(
    Y: GridFunction, X: GridFunction, levels: int = 4, tol: float = 1e-2, t: float | None = None
) -> FollmerResult:
    """Forward sums of ``Y`` against ``X`` on ``levels`` nested dyadic partitions.

    The finest level is the full grid; level ``j`` below it keeps every
    ``2^j``-th point.  ``converged`` holds when the last two levels differ by at
    most ``tol``.
    """
    if Y.grid != X.grid:
        raise ValueError("integrand and integrator must share a grid")
    if levels < 1:
        raise ValueError("need at least one level")
    k = X.grid.n_cells if t is None else X.grid.index(t)
    factor = 2 ** (levels - 1)
    if k % factor or k // factor < 1:
        raise ValueError(f"{levels} dyadic levels exceed the depth of a {k}-cell grid")
    y, x = Y.values[: k + 1], X.values[: k + 1]
    sums = tuple(forward_sum(y[:: 2**j], x[:: 2**j]) for j in range(levels - 1, -1, -1))
    gap = abs(sums[-1] - sums[-2]) if levels > 1 else float("inf")
    return FollmerResult(sums[-1], sums, bool(gap <= tol), float(gap), float(tol))


# ---------------------------------------------------------------------------
# bounded-variation rules and the Itô formula
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BVRule:
    """A bounded-variation function ``f`` together with a primitive ``F`` (``F(0) = 0``)."""

    name: str
    K: float = 0.0
    c: float = 1.0
    eta: float = 1.0

    def __post_init__(self) -> None:
        if self.name not in ("constant", "sign", "indicator", "power_sign"):
            raise ValueError(f"rule {self.name!r} is not a supported bounded-variation rule")
        if self.name == "power_sign" and self.eta < 0:
            raise ValueError("power_sign needs eta >= 0")

    def f(self, x):
        x = np.asarray(x, dtype=float)
        if self.name == "constant":
            return np.full_like(x, self.c)
        if self.name == "sign":
            return np.sign(x)
        if self.name == "indicator":
            return (x > self.K).astype(float)
        return f_eta(x, self.eta)

    def F(self, x):
        x = np.asarray(x, dtype=float)
        if self.name == "constant":
            return self.c * x
        if self.name == "sign":
            return np.abs(x)
        if self.name == "indicator":
            return np.maximum(x - self.K, 0.0) - max(-self.K, 0.0)
        return np.abs(x) ** (1.0 + self.eta)


def default_delta(model: CovarianceModel, T: float) -> float:
    """Window length ``delta`` for Itô checks.

    Models with stationary increments or stationary covariance satisfy the class
    conditions uniformly in the shift, so the whole horizon is allowed; for a
    generic kernel only the second half is.
    """
    return 0.5 * T if model.structure == GENERIC else T


def ito_residual(
    model: CovarianceModel,
    rule: BVRule,
    u: float,
    path: GridFunction,
    delta: float | None = None,
) -> float:
    """``F(X_T - X_u) - int_u^T f(X_s - X_u) dX_s`` with the forward sum on the grid."""
    T = path.grid.horizon
    delta = default_delta(model, T) if delta is None else delta
    if not (T - delta - 1e-12 <= u < T):
        raise ValueError(f"u={u} must lie in [T - delta, T) = [{T - delta}, {T})")
    x = path.values[path.grid.index(u) :]
    incr = x - x[0]
    integral = forward_sum(rule.f(incr), x)
    return float(rule.F(incr[-1]) - integral)
