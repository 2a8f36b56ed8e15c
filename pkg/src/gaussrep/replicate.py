"""Replication of random variables by pathwise integrals.

Every construction here is a chain of blocks on a partition of a time
interval.  Inside a block the integrand is one of the step rules of
:mod:`gaussrep.pathwise` and the block stops at the first grid point where its
stopping condition holds.  The running value of the integral is booked with the
Itô formula, so a block anchored at ``a`` and stopped at ``tau`` adds

* ``|X_tau - X_a|^(1+eta)`` for the rule ``f_eta(X_s - X_a)``;
* ``c |X_tau - X_a|`` for the rule ``c sign(X_s - X_a)``.

The forward Riemann-Stieltjes sum of the same block is recorded next to it;
both agree up to discretisation error (see :func:`gaussrep.pathwise.ito_residual`).
"""

from __future__ import annotations

import math
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg, stats

from .gp_sim import CovarianceModel
from .grid import GridFunction, TimeGrid
from .pathwise import Segment, StepIntegrand, f_eta, integrate_step

WINDOW_GUARD = 1e-3
ARCTAN_CLIP = 1e-6
DEFAULT_SUB_BLOCKS = 50
DEFAULT_OUTER_GAMMA = 2.0


class WindowError(ValueError):
    """A parameter lies outside its admissible open window."""


def _require(lo: float, value: float, hi: float, name: str) -> None:
    if not lo < value < hi:
        raise WindowError(f"{name} = {value:g} must satisfy {lo:g} < {name} < {hi:g}")


def _midpoint(lo: float, hi: float, name: str) -> float:
    if hi - lo < WINDOW_GUARD:
        raise WindowError(f"window for {name} ({lo:g}, {hi:g}) is narrower than {WINDOW_GUARD:g}")
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# partitions and parameters
# ---------------------------------------------------------------------------

# 2 zeta(3) / (2 pi)^3 bounds the periodic Bernoulli factor of the remainder
_EM_CONST = 2 * 1.2020569031595942 / (2 * math.pi) ** 3


def zeta_tail(gamma: float, m: int) -> tuple[float, float]:
    """``sum_{k >= m} k^-gamma`` by Euler-Maclaurin, with an error bound."""
    est = m ** (1 - gamma) / (gamma - 1) + 0.5 * m**-gamma + gamma * m ** (-gamma - 1) / 12
    bound = _EM_CONST * gamma * (gamma + 1) * m ** (-gamma - 2)
    return est, bound


def zeta_sum(gamma: float, rel_tol: float = 1e-12, start: int = 1) -> float:
    """``sum_{k >= start} k^-gamma``: direct sum up to ``m - 1`` plus the tail from ``m``."""
    if gamma <= 1:
        raise WindowError(f"the series sum k^-gamma diverges for gamma = {gamma:g} <= 1")
    m = max(16, 2 * start)
    while True:
        head = float(np.sum(np.arange(start, m, dtype=float) ** -gamma))
        tail, bound = zeta_tail(gamma, m)
        if bound <= rel_tol * (head + tail) or m >= 2**24:
            return head + tail
        m *= 2


@dataclass(frozen=True)
class PartitionSchedule:
    """Times ``t_0 = start < t_1 < ...`` with gaps ``(T - start) n^-gamma / S``."""

    gamma: float
    T: float
    n_max: int
    start: float
    normalizer: float
    gaps: np.ndarray  # gaps[n - 1] = Delta_n
    times: np.ndarray  # times[n] = t_n, n = 0 .. n_max
    tail_tol: float

    @property
    def span(self) -> float:
        return self.T - self.start

    def remaining(self) -> float:
        """``sum_{n > n_max} Delta_n`` (the part of the span never reached)."""
        return self.span * zeta_sum(self.gamma, self.tail_tol, self.n_max + 1) / self.normalizer

    def shifted(self, start: float, T: float) -> "PartitionSchedule":
        return partition_schedule(self.gamma, T, self.n_max, self.tail_tol, start)


def partition_schedule(
    gamma: float, T: float, n_max: int, tail_tol: float = 1e-12, start: float = 0.0
) -> PartitionSchedule:
    if gamma <= 1:
        raise WindowError(f"gamma = {gamma:g} must exceed 1 (the series diverges otherwise)")
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    if not start < T:
        raise ValueError(f"start {start} must precede T {T}")
    S = zeta_sum(gamma, tail_tol)
    n = np.arange(1, n_max + 1, dtype=float)
    gaps = (T - start) * n**-gamma / S
    times = start + np.concatenate(([0.0], np.cumsum(gaps)))
    times = np.minimum(times, np.nextafter(T, -np.inf))
    return PartitionSchedule(float(gamma), float(T), int(n_max), float(start), S, gaps, times, tail_tol)


@dataclass(frozen=True)
class LemmaParams:
    alpha: float
    gamma: float
    eta: float

    def __post_init__(self) -> None:
        _require(0.5, self.alpha, 1.0, "alpha")
        _require(1.0, self.gamma, 1.0 / self.alpha, "gamma")
        _require(0.0, self.eta, 1.0 / (self.gamma * self.alpha) - 1.0, "eta")

    def threshold(self, n: int) -> float:
        """``n^(-1/(1+eta))``, nudged up so that ``threshold^(1+eta) >= 1/n`` in floating point."""
        thr = n ** (-1.0 / (1.0 + self.eta))
        while thr ** (1.0 + self.eta) < 1.0 / n:
            thr = np.nextafter(thr, np.inf)
        return float(thr)


def default_lemma_params(alpha: float) -> LemmaParams:
    """Midpoints of the windows for ``gamma`` and ``eta``."""
    if not 0.5 < alpha < 1.0:
        raise WindowError(f"alpha = {alpha:g} must satisfy 0.5 < alpha < 1")
    gamma = _midpoint(1.0, 1.0 / alpha, "gamma")
    eta = 0.5 * (1.0 / (gamma * alpha) - 1.0)
    if eta < 0.5 * WINDOW_GUARD:
        raise WindowError(f"window for eta (0, {2 * eta:g}) is narrower than {WINDOW_GUARD:g}")
    return LemmaParams(alpha, gamma, eta)


@dataclass(frozen=True)
class HolderParams:
    alpha: float
    a: float
    beta: float
    gamma: float
    kappa: float
    theta: float = 1.0

    def __post_init__(self) -> None:
        _require(0.5, self.alpha, 1.0, "alpha")
        _require(self.theta - self.alpha, self.a, self.alpha, "a")
        _require(1.0 - self.alpha, self.beta, min(self.a, 0.5), "beta")
        if not self.gamma > max(1.0 / (self.a - self.beta), 1.0):
            raise WindowError(
                f"gamma = {self.gamma:g} must exceed max(1/(a - beta), 1) = "
                f"{max(1.0 / (self.a - self.beta), 1.0):g}"
            )
        lo, hi = self.kappa_window
        _require(lo, self.kappa, hi, "kappa")

    @property
    def kappa_window(self) -> tuple[float, float]:
        return (self.gamma * (self.alpha - self.a), self.gamma * (self.alpha - self.beta) - 1.0)


def default_holder_params(alpha: float, a: float, theta: float = 1.0) -> HolderParams:
    """Midpoint choices for ``beta`` and ``kappa``; ``gamma = max(1/(a - beta), 1) + 1``.

    ``theta < 1`` relaxes the lower bound on ``a`` to ``theta - alpha`` for
    models with a stronger quadratic lower bound; the default keeps ``1 - alpha``.
    """
    if not 0.5 < alpha < 1.0:
        raise WindowError(f"alpha = {alpha:g} must satisfy 0.5 < alpha < 1")
    if not theta <= 1.0:
        raise WindowError("theta must not exceed 1")
    if a - (theta - alpha) < WINDOW_GUARD:
        raise WindowError(f"a = {a:g} must exceed {theta - alpha:g} by at least {WINDOW_GUARD:g}")
    if alpha - a < WINDOW_GUARD:
        raise WindowError(f"a = {a:g} must lie below alpha = {alpha:g} by at least {WINDOW_GUARD:g}")
    beta = _midpoint(1.0 - alpha, min(a, 0.5), "beta")
    gamma = max(1.0 / (a - beta), 1.0) + 1.0
    kappa = _midpoint(gamma * (alpha - a), gamma * (alpha - beta) - 1.0, "kappa")
    return HolderParams(alpha, a, beta, gamma, kappa, theta)


# ---------------------------------------------------------------------------
# outcome records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BlockRecord:
    n: int
    start: float
    end: float
    stop: float
    hit: bool
    case: str  # "L" lemma block, "A"/"B" Hölder cases, "-" below grid resolution
    contribution: float
    forward_contribution: float
    threshold: float

    @property
    def resolved(self) -> bool:
        return self.case != "-"


@dataclass(frozen=True)
class ReplicationOutcome:
    integrand: StepIntegrand
    times: np.ndarray  # block end times
    trajectory: np.ndarray  # running integral at those times
    target: float
    achieved: float
    blocks: tuple[BlockRecord, ...]
    success: bool
    tol: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def overshoot(self) -> float:
        return abs(self.achieved) - abs(self.target)

    @property
    def error(self) -> float:
        return abs(self.achieved - self.target)

    def forward_value(self, X: GridFunction) -> float:
        return integrate_step(self.integrand, X)

    def summary(self) -> dict:
        resolved = [b for b in self.blocks if b.resolved]
        return {
            "target": float(self.target),
            "achieved": float(self.achieved),
            "error": float(self.error),
            "success": bool(self.success),
            "blocks": len(self.blocks),
            "resolved_blocks": len(resolved),
            "hit_blocks": int(sum(b.hit for b in resolved)),
            **{k: v for k, v in self.diagnostics.items() if np.isscalar(v)},
        }


# ---------------------------------------------------------------------------
# the diverging integrand
# ---------------------------------------------------------------------------


@dataclass
class _Chase:
    segments: list
    blocks: list
    ends: list
    values: list
    running: float
    reached: bool


def _chase(
    X: GridFunction,
    params: LemmaParams,
    schedule: PartitionSchedule,
    level: float,
    sign: float = 1.0,
    case: str = "L",
    offset: float = 0.0,
) -> _Chase:
    """Run the lemma blocks of ``schedule`` until the running value reaches ``level``.

    ``offset`` is the signed running value before the chase, used only for the
    recorded trajectory.
    """
    grid = X.grid
    x = X.values
    p = 1.0 + params.eta
    idx = [grid.index_at_or_after(t) for t in schedule.times]
    out = _Chase([], [], [], [], 0.0, level <= 0.0)
    if out.reached:
        return out
    for n in range(1, schedule.n_max + 1):
        a, e = idx[n - 1], idx[n]
        thr = params.threshold(n)
        if a == e:
            out.blocks.append(
                BlockRecord(n, grid.points[a], grid.points[e], grid.points[a], False, "-", 0.0, 0.0, thr)
            )
            continue
        incr = np.abs(x[a : e + 1] - x[a])
        val = out.running + incr**p
        cond = (incr >= thr) | (val >= level)
        cond[0] = False
        hits = np.flatnonzero(cond)
        k = int(hits[0]) if hits.size else e - a
        stop = a + k
        hit = bool(incr[k] >= thr)
        contribution = float(incr[k] ** p)
        seg = Segment(a, e, "power_sign", eta=params.eta, anchor=a, sign=sign, stop=stop)
        fwd = float(np.dot(seg.evaluate(x), np.diff(x[a : stop + 1])))
        out.segments.append(seg)
        out.running += contribution
        out.blocks.append(
            BlockRecord(n, grid.points[a], grid.points[e], grid.points[stop], hit, case, contribution, fwd, thr)
        )
        out.ends.append(grid.points[e])
        out.values.append(offset + sign * out.running)
        if val[k] >= level:
            out.reached = True
            break
    return out


def build_diverging_integrand(
    X: GridFunction,
    params: LemmaParams,
    schedule: PartitionSchedule,
    level: float,
    start: float | None = None,
    tol: float = 0.05,
) -> ReplicationOutcome:
    """Lemma construction from ``schedule.start``: run blocks until the value reaches ``level``.

    Block ``n`` integrates ``f_eta(X_s - X_{t_{n-1}})`` until ``|X_s - X_{t_{n-1}}|``
    first reaches ``n^(-1/(1+eta))`` or the block ends.  A completed block adds
    ``|X_tau - X_{t_{n-1}}|^(1+eta)``, at least ``1/n`` when the threshold is hit.
    """
    if start is not None and abs(start - schedule.start) > 1e-12:
        raise ValueError(f"schedule starts at {schedule.start}, not at {start}")
    if abs(schedule.T - X.grid.horizon) > 1e-12 * max(1.0, X.grid.horizon):
        raise ValueError("schedule horizon must equal the path horizon")
    ch = _chase(X, params, schedule, level)
    phi = StepIntegrand.build(X.grid, ch.segments)
    achieved = ch.running
    success = ch.reached
    return ReplicationOutcome(
        phi,
        np.asarray(ch.ends),
        np.asarray(ch.values),
        float(level),
        float(achieved),
        tuple(ch.blocks),
        bool(success),
        tol,
        {"forward": float(sum(b.forward_contribution for b in ch.blocks))},
    )


# ---------------------------------------------------------------------------
# distribution replication
# ---------------------------------------------------------------------------


def normal_quantile(mean: float = 0.0, std: float = 1.0) -> Callable:
    return lambda p: stats.norm.ppf(p, loc=mean, scale=std)


def quantile_from_cdf_table(xs, cdf) -> Callable:
    """Inverse of a tabulated, strictly increasing CDF by monotone linear interpolation."""
    xs = np.asarray(xs, dtype=float)
    cdf = np.asarray(cdf, dtype=float)
    if xs.shape != cdf.shape or xs.size < 2:
        raise ValueError("need matching tables with at least two points")
    if np.any(np.diff(xs) <= 0) or np.any(np.diff(cdf) <= 0):
        raise ValueError("tabulated CDF must be strictly increasing")
    return lambda p: np.interp(p, cdf, xs)


def distribution_map(quantile: Callable, variance: float) -> Callable:
    """``g(x) = F^-1(Phi(x / sqrt(V)))``, mapping ``N(0, V)`` onto ``F``."""
    sd = math.sqrt(variance)
    return lambda x: quantile(stats.norm.cdf(np.asarray(x) / sd))


def replicate_distribution(
    quantile: Callable,
    model: CovarianceModel,
    X: GridFunction,
    v: float,
    params: LemmaParams | None = None,
    schedule: PartitionSchedule | None = None,
    n_max: int = 200,
    tol: float = 0.05,
) -> ReplicationOutcome:
    """Integral over ``[0, T]`` equal in law to ``F``: chase ``|g(X_v)|`` from ``v``."""
    T = X.grid.horizon
    if not 0 <= v < T:
        raise ValueError(f"v = {v} must lie in [0, T)")
    var = float(model.var(v))
    if not var > 0:
        raise ValueError(f"variance at v = {v} vanishes")
    params = params or default_lemma_params(model.alpha)
    vi = X.grid.index(v)
    if schedule is None:
        schedule = partition_schedule(params.gamma, T, n_max, start=X.grid.points[vi])
    target = float(distribution_map(quantile, var)(X.values[vi]))
    if not np.isfinite(target):
        raise FloatingPointError(f"quantile is not finite at the realised level X_v = {X.values[vi]}")
    sign = float(np.sign(target))
    ch = _chase(X, params, schedule, abs(target), sign)
    phi = StepIntegrand.build(X.grid, ch.segments)
    achieved = sign * ch.running
    over = ch.running - abs(target)
    success = ch.reached and over <= tol
    return ReplicationOutcome(
        phi,
        np.asarray(ch.ends),
        np.asarray(ch.values),
        target,
        float(achieved),
        tuple(ch.blocks),
        bool(success),
        tol,
        {"reached": bool(ch.reached), "overshoot": float(over), "x_v": float(X.values[vi])},
    )


# ---------------------------------------------------------------------------
# conditional expectations of arctan(xi)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TargetSpec:
    """A random variable ``xi = h(X_{s_1}, ..., X_{s_m})``."""

    kind: str  # constant | linear | call | smooth
    times: tuple[float, ...] = ()
    weights: tuple[float, ...] = ()
    constant: float = 0.0
    strike: float = 0.0
    func: Callable | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if self.kind == "constant":
            return
        if not self.times:
            raise ValueError(f"{self.kind} target needs observation times")
        if self.kind == "linear":
            if len(self.weights) != len(self.times):
                raise ValueError("linear target needs one weight per time")
        elif self.kind == "call":
            if len(self.times) != 1:
                raise ValueError("call target uses exactly one time")
        elif self.kind == "smooth":
            if self.func is None:
                raise ValueError("smooth target needs a function")
            if len(self.times) > 2:
                raise ValueError("smooth targets support at most two times")
        else:
            raise ValueError(f"unsupported target kind {self.kind!r}")

    @classmethod
    def call(cls, time: float, strike: float) -> "TargetSpec":
        return cls("call", (time,), strike=strike)

    def h(self, x: np.ndarray) -> np.ndarray:
        """Evaluate on rows of ``x`` (last axis = coordinates)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full(x.shape[:-1], self.constant)
        if self.kind == "linear":
            return x @ np.asarray(self.weights) + self.constant
        if self.kind == "call":
            return np.maximum(x[..., 0] - self.strike, 0.0)
        return np.asarray(self.func(*np.moveaxis(x, -1, 0)), dtype=float)

    def realized(self, X: GridFunction) -> float:
        return float(self.h(np.array([X(t) for t in self.times])))


_LAW_CACHE: OrderedDict = OrderedDict()
_LAW_LOCK = threading.Lock()


def _conditional_law(model: CovarianceModel, grid: TimeGrid, k: int, times: tuple, max_obs: int):
    """Weights ``A`` and covariance ``C`` of ``(X_s)`` given the grid values up to index ``k``."""
    key = (model.tag, grid.key, k, times, max_obs)
    with _LAW_LOCK:
        if key in _LAW_CACHE:
            _LAW_CACHE.move_to_end(key)
            return _LAW_CACHE[key]
    pts = grid.points
    step = max(1, math.ceil(k / max_obs))
    obs = set(range(k, -1, -step))
    obs.update(grid.index(s) for s in times if s <= pts[k] + 1e-12)
    obs = np.array(sorted(i for i in obs if model.var(pts[i]) > 0), dtype=int)
    s = np.asarray(times)
    css = np.atleast_2d(model.cov(s[:, None], s[None, :]))
    if obs.size == 0:
        A = np.zeros((s.size, 0))
        C = css
    else:
        to = pts[obs]
        coo = model.cov(to[:, None], to[None, :])
        cso = model.cov(s[:, None], to[None, :])
        scale = float(np.mean(np.diag(coo)))
        for jit in (0.0, 1e-12, 1e-10, 1e-8):
            try:
                fac = linalg.cho_factor(coo + jit * scale * np.eye(obs.size), lower=True)
                break
            except linalg.LinAlgError:
                continue
        else:
            raise np.linalg.LinAlgError("observation covariance is not positive definite")
        A = linalg.cho_solve(fac, cso.T).T
        C = css - A @ cso.T
    C = 0.5 * (C + C.T)
    lam, V = np.linalg.eigh(C)
    if lam.min() < -1e-8 * max(1.0, float(np.max(np.abs(np.diag(css))))):
        raise np.linalg.LinAlgError(f"conditional covariance not PSD (min eigenvalue {lam.min():.3g})")
    root = V * np.sqrt(np.clip(lam, 0.0, None))
    law = (obs, A, C, root)
    with _LAW_LOCK:
        _LAW_CACHE[key] = law
        while len(_LAW_CACHE) > 256:
            _LAW_CACHE.popitem(last=False)
    return law


def conditional_expectation_arctan(
    spec: TargetSpec,
    X: GridFunction,
    t: float,
    model: CovarianceModel,
    n_nodes: int = 64,
    max_obs: int = 1024,
) -> float:
    """``E[arctan xi | X_u, u <= t on the grid]`` by Gauss-Hermite quadrature.

    The observations are the grid values up to ``t``, thinned to at most
    ``max_obs`` equally spaced indices (the last one and the target times already
    passed are always kept).
    """
    if n_nodes < 64:
        raise ValueError("use at least 64 quadrature nodes per dimension")
    if spec.kind == "constant":
        return math.atan(spec.constant)
    k = X.grid.index(t)
    if t >= max(spec.times) - 1e-12:
        return math.atan(spec.realized(X))
    obs, A, C, root = _conditional_law(model, X.grid, k, spec.times, max_obs)
    mu = A @ X.values[obs]
    z, w = np.polynomial.hermite.hermgauss(n_nodes)
    z = math.sqrt(2.0) * z
    w = w / math.sqrt(math.pi)
    if spec.kind == "linear":
        wv = np.asarray(spec.weights)
        sd = math.sqrt(max(float(wv @ C @ wv), 0.0))
        vals = np.arctan(float(wv @ mu) + spec.constant + sd * z)
        return float(w @ vals)
    m = len(spec.times)
    if m == 1:
        pts = mu[None, :] + root[0, 0] * z[:, None]
        return float(w @ np.arctan(spec.h(pts)))
    zz = np.stack(np.meshgrid(z, z, indexing="ij"), axis=-1).reshape(-1, 2)
    ww = np.outer(w, w).ravel()
    pts = mu[None, :] + zz @ root.T
    return float(ww @ np.arctan(spec.h(pts)))


def tan_clipped(v: float) -> float:
    lim = 0.5 * math.pi - ARCTAN_CLIP
    return math.tan(min(max(v, -lim), lim))


# ---------------------------------------------------------------------------
# improper replication of an arbitrary random variable
# ---------------------------------------------------------------------------


def replicate_rv(
    spec: TargetSpec,
    model: CovarianceModel,
    X: GridFunction,
    schedule: PartitionSchedule | None = None,
    params: LemmaParams | None = None,
    n_blocks: int = 10,
    n_sub: int = DEFAULT_SUB_BLOCKS,
    tol: float = 0.05,
    max_obs: int = 1024,
) -> ReplicationOutcome:
    """Integral whose values at ``t_n`` converge to ``xi`` as ``t_n -> T``.

    ``Y_t = tan E[arctan xi | F_t]`` is sampled at the outer times ``t_n``.
    Block ``n`` on ``[t_n, t_{n+1})`` chases ``|Y_{t_n} - V_{t_n}|`` with a lemma
    construction on its own sub-partition, so a missed block carries its
    residual into the next one.  ``trajectory[n - 1]`` is ``V_{t_n}`` and the
    diagnostics hold ``|V_{t_n} - xi|``.
    """
    T = X.grid.horizon
    params = params or default_lemma_params(model.alpha)
    if schedule is None:
        schedule = partition_schedule(DEFAULT_OUTER_GAMMA, T, n_blocks + 1)
    n_blocks = min(n_blocks, schedule.n_max - 1)
    grid = X.grid
    idx = [grid.index_at_or_after(t) for t in schedule.times]
    xi = spec.realized(X)
    V = 0.0
    segs: list = []
    blocks: list = []
    ends = [grid.points[idx[1]]]
    values = [0.0]
    ys = []
    for n in range(1, n_blocks + 1):
        a, e = idx[n], idx[n + 1]
        y = tan_clipped(conditional_expectation_arctan(spec, X, grid.points[a], model, max_obs=max_obs))
        ys.append(y)
        d = y - V
        if a < e:
            sub = partition_schedule(params.gamma, grid.points[e], n_sub, start=grid.points[a])
            ch = _chase(X, params, sub, abs(d), float(np.sign(d)), offset=V)
            segs.extend(ch.segments)
            hit = ch.reached
            V += float(np.sign(d)) * ch.running
            fwd = sum(b.forward_contribution for b in ch.blocks)
            stop = ch.blocks[-1].stop if ch.blocks else grid.points[a]
            blocks.append(BlockRecord(n, grid.points[a], grid.points[e], stop, hit, "L", V - values[-1], fwd, abs(d)))
        else:
            blocks.append(BlockRecord(n, grid.points[a], grid.points[e], grid.points[a], False, "-", 0.0, 0.0, abs(d)))
        ends.append(grid.points[e])
        values.append(V)
    phi = StepIntegrand.build(grid, segs)
    errors = np.abs(np.asarray(values) - xi)
    return ReplicationOutcome(
        phi,
        np.asarray(ends),
        np.asarray(values),
        xi,
        V,
        tuple(blocks),
        bool(errors[-1] <= tol),
        tol,
        {"errors": errors, "y": np.asarray(ys)},
    )


# ---------------------------------------------------------------------------
# proper replication of Hölder endpoints
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HolderTarget:
    """A process ``Z`` on the path's grid whose endpoint is the target."""

    kind: str  # path | function | constant | auxiliary
    func: Callable | None = None
    constant: float = 0.0
    values: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("path", "function", "constant", "auxiliary"):
            raise ValueError(f"unsupported Hölder target {self.kind!r}")
        if self.kind == "function" and self.func is None:
            raise ValueError("function target needs a function")
        if self.kind == "auxiliary" and self.values is None:
            raise ValueError("auxiliary target needs values on the grid")

    def evaluate(self, X: GridFunction) -> np.ndarray:
        x = X.values
        if self.kind == "path":
            return x.copy()
        if self.kind == "function":
            return np.asarray(self.func(x), dtype=float) * np.ones_like(x)
        if self.kind == "constant":
            return np.full_like(x, self.constant)
        z = np.asarray(self.values, dtype=float)
        if z.shape != x.shape:
            raise ValueError("auxiliary values do not match the grid")
        return z


def holder_schedule(params: HolderParams, T: float, n_max: int, delta: float | None = None) -> PartitionSchedule:
    """Block times ``t_1 = T - delta`` and ``t_n = t_1 + sum_{k < n} Delta_k`` (``times[n-1] = t_n``)."""
    delta = 0.5 * T if delta is None else delta
    if not 0 < delta <= T:
        raise ValueError("delta must lie in (0, T]")
    return partition_schedule(params.gamma, T, n_max, start=T - delta)


def replicate_holder(
    target: HolderTarget,
    model: CovarianceModel,
    X: GridFunction,
    params: HolderParams,
    schedule: PartitionSchedule | None = None,
    lemma: LemmaParams | None = None,
    n_max: int = 30,
    n_sub: int = DEFAULT_SUB_BLOCKS,
    delta: float | None = None,
    tol: float = 0.05,
) -> ReplicationOutcome:
    """Integral over ``[0, T]`` equal to ``Z_T``, built block by block.

    The integrand vanishes on ``[0, t_1]``.  On ``(t_{n-1}, t_n]`` the target is
    ``d = Z_{t_{n-1}} - Y_{t_{n-1}}``.  After a block that reached its target
    (Case A) the integrand is ``n^kappa sign(X_s - X_{t_{n-1}}) sign(d)`` until
    ``n^kappa |X_s - X_{t_{n-1}}|`` reaches ``|d|``; otherwise (Case B) a lemma
    chase with level ``|d|`` runs on the block.
    """
    grid = X.grid
    T = grid.horizon
    lemma = lemma or default_lemma_params(params.alpha)
    if schedule is None:
        schedule = holder_schedule(params, T, n_max, delta)
    n_max = schedule.n_max
    z = target.evaluate(X)
    x = X.values
    # block n runs on [t_{n-1}, t_n] with t_0 = 0 and t_n = schedule.times[n - 1]
    tpts = np.concatenate(([0.0], schedule.times[:n_max]))
    idx = [grid.index_at_or_after(t) for t in tpts]
    Y = 0.0
    prev_hit = abs(z[idx[0]]) <= 1e-12
    segs: list = []
    blocks: list = []
    ends = [grid.points[idx[1]]]
    values = [0.0]
    for n in range(2, n_max + 1):
        a, e = idx[n - 1], idx[n]
        d = float(z[a] - Y)
        case = "A" if prev_hit else "B"
        if a == e:
            blocks.append(BlockRecord(n, grid.points[a], grid.points[e], grid.points[a], False, "-", 0.0, 0.0, abs(d)))
            continue
        if case == "A":
            mult = n**params.kappa
            if d == 0.0:
                stop, hit, contrib, fwd = a, True, 0.0, 0.0
            else:
                reach = mult * np.abs(x[a : e + 1] - x[a])
                ok = np.flatnonzero(reach[1:] >= abs(d))
                hit = ok.size > 0
                k = int(ok[0]) + 1 if hit else e - a
                stop = a + k
                seg = Segment(a, e, "scaled_sign", anchor=a, multiplier=mult, sign=float(np.sign(d)), stop=stop)
                segs.append(seg)
                contrib = float(np.sign(d) * reach[k])
                fwd = float(np.dot(seg.evaluate(x), np.diff(x[a : stop + 1])))
            blocks.append(BlockRecord(n, grid.points[a], grid.points[e], grid.points[stop], hit, "A", contrib, fwd, abs(d)))
        else:
            sub = partition_schedule(lemma.gamma, grid.points[e], n_sub, start=grid.points[a])
            ch = _chase(X, lemma, sub, abs(d), float(np.sign(d)), offset=Y)
            segs.extend(ch.segments)
            hit = ch.reached
            contrib = float(np.sign(d)) * ch.running
            fwd = sum(b.forward_contribution for b in ch.blocks)
            stop = ch.blocks[-1].stop if ch.blocks else grid.points[a]
            blocks.append(BlockRecord(n, grid.points[a], grid.points[e], stop, hit, "B", contrib, fwd, abs(d)))
        Y += contrib
        prev_hit = hit
        ends.append(grid.points[e])
        values.append(Y)
    phi = StepIntegrand.build(grid, segs)
    xi = float(z[-1])
    err = abs(Y - xi)
    resolved = [b for b in blocks if b.resolved]
    return ReplicationOutcome(
        phi,
        np.asarray(ends),
        np.asarray(values),
        xi,
        Y,
        tuple(blocks),
        bool(err <= tol),
        tol,
        {
            "case_b_frequency": float(np.mean([b.case == "B" for b in resolved])) if resolved else 0.0,
            "resolved_blocks": len(resolved),
            "last_resolved_time": float(resolved[-1].end) if resolved else float(grid.points[idx[1]]),
            "t1": float(tpts[1]),
        },
    )
