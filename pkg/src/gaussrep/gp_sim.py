"""Covariance models, exact Gaussian path sampling and class-condition checks.

Models are frozen dataclasses exposing vectorised ``cov``/``var``/``incr_var``.
Paths are sampled exactly on a grid, either by dense Cholesky factorisation of
the grid covariance (any model) or by circulant embedding (uniform grids,
models with stationary increments or stationary covariance).
"""

from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from . import rng
from .grid import GridFunction, TimeGrid

STATIONARY_INCREMENTS = "stationary-increments"
STATIONARY = "stationary"
GENERIC = "generic"


class FactorizationError(RuntimeError):
    """Grid covariance could not be factorised even with jitter."""

    def __init__(self, message: str, min_eigenvalue: float):
        super().__init__(f"{message} (smallest eigenvalue {min_eigenvalue:.3e})")
        self.min_eigenvalue = min_eigenvalue


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------


class CovarianceModel:
    """Centred Gaussian law given by its covariance function ``R(t, s)``."""

    structure = GENERIC

    @property
    def alpha(self) -> float:
        raise NotImplementedError

    @property
    def tag(self) -> str:
        raise NotImplementedError

    def cov(self, t, s):
        raise NotImplementedError

    def var(self, t):
        t = np.asarray(t, dtype=float)
        return self.cov(t, t)

    def incr_var(self, t, s):
        """``W(t, s) = E(X_t - X_s)^2``."""
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        return self.var(t) + self.var(s) - 2.0 * self.cov(t, s)

    def w0(self, x):
        """``W(0, x)`` for models whose incremental variance depends on the lag only."""
        raise ValueError(
            f"{self.tag}: incremental variance depends on the starting point; "
            "no lag-only form W(0, x) exists"
        )


@dataclass(frozen=True)
class FBM(CovarianceModel):
    """Fractional Brownian motion with Hurst index ``H``."""

    H: float
    structure = STATIONARY_INCREMENTS

    def __post_init__(self) -> None:
        if not 0.0 < self.H < 1.0:
            raise ValueError(f"Hurst index must lie in (0, 1), got {self.H}")

    @property
    def alpha(self) -> float:
        return self.H

    @property
    def tag(self) -> str:
        return f"fbm(H={self.H:g})"

    def cov(self, t, s):
        t = np.abs(np.asarray(t, dtype=float))
        s = np.abs(np.asarray(s, dtype=float))
        h2 = 2.0 * self.H
        return 0.5 * (t**h2 + s**h2 - np.abs(t - s) ** h2)

    def var(self, t):
        return np.abs(np.asarray(t, dtype=float)) ** (2.0 * self.H)

    def incr_var(self, t, s):
        return np.abs(np.asarray(t, dtype=float) - np.asarray(s, dtype=float)) ** (2.0 * self.H)

    def w0(self, x):
        return np.abs(np.asarray(x, dtype=float)) ** (2.0 * self.H)


class _Stationary(CovarianceModel):
    structure = STATIONARY

    def r(self, lag):
        raise NotImplementedError

    def cov(self, t, s):
        return self.r(np.asarray(t, dtype=float) - np.asarray(s, dtype=float))

    def var(self, t):
        return np.full(np.shape(t), float(self.r(0.0)))

    def incr_var(self, t, s):
        return 2.0 * (self.r(0.0) - self.r(np.asarray(t, dtype=float) - np.asarray(s, dtype=float)))

    def w0(self, x):
        return 2.0 * (self.r(0.0) - self.r(np.asarray(x, dtype=float)))


@dataclass(frozen=True)
class StationaryExp(_Stationary):
    """Stationary process with ``r(t) = exp(-|t|^(2 alpha))``."""

    exponent: float

    def __post_init__(self) -> None:
        if not 0.0 < self.exponent <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.exponent}")

    @property
    def alpha(self) -> float:
        return self.exponent

    @property
    def tag(self) -> str:
        return f"stationary_exp(alpha={self.exponent:g})"

    def r(self, lag):
        return np.exp(-np.abs(np.asarray(lag, dtype=float)) ** (2.0 * self.exponent))


@dataclass(frozen=True)
class StationaryGeneric(_Stationary):
    """Stationary process with a user supplied covariance function ``r``."""

    func: Callable = field(compare=True)
    exponent: float = 0.75
    name: str = "stationary"

    @property
    def alpha(self) -> float:
        return self.exponent

    @property
    def tag(self) -> str:
        return f"{self.name}(alpha={self.exponent:g})"

    def r(self, lag):
        lag = np.abs(np.asarray(lag, dtype=float))
        return np.asarray(self.func(lag), dtype=float) * np.ones_like(lag)

    @classmethod
    def from_table(cls, lags, values, exponent: float = 0.75, name: str = "tabulated"):
        """Linear interpolation of tabulated ``(t, r(t))`` pairs, constant past the end."""
        lags = np.asarray(lags, dtype=float)
        values = np.asarray(values, dtype=float)
        order = np.argsort(lags)
        lags, values = lags[order], values[order]
        if lags[0] != 0.0:
            raise ValueError("tabulated covariance must start at lag 0")
        lags.setflags(write=False)
        values.setflags(write=False)

        def table(x, _l=lags, _v=values):
            return np.interp(x, _l, _v)

        return cls(table, exponent, name)


@dataclass(frozen=True)
class GenericKernel(CovarianceModel):
    """Arbitrary covariance kernel ``R(t, s)``."""

    func: Callable = field(compare=True)
    exponent: float = 0.75
    name: str = "kernel"

    @property
    def alpha(self) -> float:
        return self.exponent

    @property
    def tag(self) -> str:
        return f"{self.name}(alpha={self.exponent:g})"

    def cov(self, t, s):
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        return np.asarray(self.func(t, s), dtype=float) * np.ones(np.broadcast(t, s).shape)


def _check_domain(T: float | None, *times) -> None:
    for x in times:
        x = np.asarray(x, dtype=float)
        if np.any(x < 0) or (T is not None and np.any(x > T * (1 + 1e-12))):
            raise ValueError(f"times must lie in [0, {T}], got {x}")


def covariance(model: CovarianceModel, t, s, T: float | None = None):
    """``R_X(t, s)``; symmetric in its arguments."""
    _check_domain(T, t, s)
    a, b = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
    out = 0.5 * (model.cov(a, b) + model.cov(b, a))
    return float(out) if out.ndim == 0 else out


def incremental_variance(model: CovarianceModel, t, s, T: float | None = None):
    """``W_X(t, s) = V(t) + V(s) - 2 R(t, s)``; exactly zero on the diagonal."""
    _check_domain(T, t, s)
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    out = np.where(t == s, 0.0, model.incr_var(t, s))
    return float(out) if out.ndim == 0 else out


def covariance_matrix(model: CovarianceModel, points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    R = model.cov(pts[:, None], pts[None, :])
    return 0.5 * (R + R.T)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SamplePath(GridFunction):
    """One realisation on a grid; reproducible from ``(model, grid, seed, index)``."""

    seed: int = 0
    model: str = ""
    index: int = 0

    def as_function(self) -> GridFunction:
        return GridFunction(self.grid, self.values)


@dataclass(frozen=True, eq=False)
class PathBatch:
    grid: TimeGrid
    values: np.ndarray  # (count, N + 1)
    seed: int
    model: str
    indices: np.ndarray

    def __len__(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, i: int) -> SamplePath:
        return SamplePath(self.grid, self.values[i], self.seed, self.model, int(self.indices[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))


_CACHE: OrderedDict = OrderedDict()
_CACHE_LOCK = threading.Lock()
_CACHE_SIZE = 8
_JITTERS = (0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8)


def _cached(key, build):
    with _CACHE_LOCK:
        if key in _CACHE:
            _CACHE.move_to_end(key)
            return _CACHE[key]
    value = build()
    with _CACHE_LOCK:
        _CACHE[key] = value
        while len(_CACHE) > _CACHE_SIZE:
            _CACHE.popitem(last=False)
    return value


def cholesky_factor(model: CovarianceModel, points) -> tuple[np.ndarray, np.ndarray]:
    """Lower factor of the covariance restricted to points of non-zero variance.

    Returns ``(L, mask)``; points outside ``mask`` have zero variance and are
    sampled as 0.  Diagonal jitter escalates from 1e-12 to 1e-8 (relative).
    """
    R = covariance_matrix(model, points)
    diag = np.diag(R)
    scale = float(np.max(diag)) if diag.size else 1.0
    mask = diag > 1e-14 * scale
    Rm = R[np.ix_(mask, mask)]
    mean_diag = float(np.mean(np.diag(Rm)))
    for jitter in _JITTERS:
        try:
            L = np.linalg.cholesky(Rm + jitter * mean_diag * np.eye(Rm.shape[0]))
            return L, mask
        except np.linalg.LinAlgError:
            continue
    min_eig = float(scipy.linalg.eigvalsh(Rm, subset_by_index=[0, 0])[0])
    raise FactorizationError("covariance matrix is not positive semidefinite", min_eig)


def _circulant_row(model: CovarianceModel, grid: TimeGrid, m: int) -> np.ndarray:
    h = grid.step
    k = np.arange(m + 1, dtype=float)
    if model.structure == STATIONARY_INCREMENTS:
        # autocovariance of the increment sequence
        w = model.w0
        acf = 0.5 * (w((k + 1) * h) + w(np.abs(k - 1) * h) - 2.0 * w(k * h))
    else:
        acf = model.r(k * h)
    return np.concatenate([acf, acf[-2:0:-1]])


def circulant_spectrum(model: CovarianceModel, grid: TimeGrid) -> np.ndarray | None:
    """Square-root eigenvalues of a non-negative circulant embedding, or None."""
    n = grid.n_cells
    for m in (n, 2 * n, 4 * n, 8 * n):
        row = _circulant_row(model, grid, m)
        lam = np.fft.fft(row).real
        if lam.min() >= -1e-10 * lam.max():
            return np.sqrt(np.clip(lam, 0.0, None) / row.size)
    return None


def _factor(model: CovarianceModel, grid: TimeGrid, method: str):
    circulant_ok = grid.is_uniform and model.structure in (STATIONARY_INCREMENTS, STATIONARY)
    if method == "circulant" and not circulant_ok:
        raise ValueError("circulant embedding needs a uniform grid and a stationary structure")
    if method in ("auto", "circulant") and circulant_ok:
        spec = _cached((model, grid.key, "circ"), lambda: circulant_spectrum(model, grid))
        if spec is not None:
            return "circulant", spec
        if method == "circulant":
            raise FactorizationError("circulant embedding has negative eigenvalues", -1.0)
    return "cholesky", _cached(
        (model, grid.key, "chol"), lambda: cholesky_factor(model, grid.points)
    )


def sample_paths(
    model: CovarianceModel,
    grid: TimeGrid,
    count: int,
    seed: int,
    method: str = "auto",
    indices=None,
) -> PathBatch:
    """Exact centred Gaussian paths with the model covariance on ``grid``.

    Path ``i`` is driven by its own counter-based stream ``(seed, i)``, so any
    subset of a batch can be regenerated alone by passing ``indices``.
    """
    if indices is None:
        if count <= 0:
            raise ValueError("count must be positive")
        indices = np.arange(count)
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        raise ValueError("count must be positive")
    kind, fac = _factor(model, grid, method)
    n = grid.n_cells
    out = np.empty((indices.size, n + 1))
    if kind == "circulant":
        sqrt_lam = fac
        M = sqrt_lam.size
        chunk = max(1, 2**22 // M)
        for lo in range(0, indices.size, chunk):
            idx = indices[lo : lo + chunk]
            z = np.stack([rng.path_normals(seed, int(i), 2 * M) for i in idx])
            zc = z[:, :M] + 1j * z[:, M:]
            y = np.fft.fft(sqrt_lam * zc, axis=1).real
            if model.structure == STATIONARY_INCREMENTS:
                out[lo : lo + idx.size, 0] = 0.0
                np.cumsum(y[:, :n], axis=1, out=out[lo : lo + idx.size, 1:])
            else:
                out[lo : lo + idx.size] = y[:, : n + 1]
    else:
        L, mask = fac
        z = np.stack([rng.path_normals(seed, int(i), L.shape[0]) for i in indices])
        out[:] = 0.0
        out[:, mask] = z @ L.T
    return PathBatch(grid, out, int(seed), model.tag, indices)


def sample_points(model: CovarianceModel, points, count: int, gen: np.random.Generator) -> np.ndarray:
    """Joint samples of ``(X_{p_1}, ..., X_{p_k})`` at arbitrary times (rows = draws)."""
    L, mask = cholesky_factor(model, points)
    out = np.zeros((count, len(points)))
    out[:, mask] = gen.standard_normal((count, L.shape[0])) @ L.T
    return out


# ---------------------------------------------------------------------------
# class conditions
# ---------------------------------------------------------------------------


@dataclass
class ClassReport:
    positive_covariance: bool
    holder_bound: bool
    quadratic_lower_bound: bool
    bounded_ratio: bool
    C: float
    holder_exponent: float
    c: float
    ratio_sup: float
    min_increment_covariance: float
    alpha: float
    window: tuple[float, float]
    delta_hat: float
    shifts: list[float]
    n_cells: int

    @property
    def passed(self) -> bool:
        return (
            self.positive_covariance
            and self.holder_bound
            and self.quadratic_lower_bound
            and self.bounded_ratio
        )

    def as_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items()}
        d["window"] = list(self.window)
        d["passed"] = self.passed
        return d


def _loglog_slope(x: np.ndarray, y: np.ndarray) -> float:
    lx, ly = np.log(x), np.log(y)
    A = np.vstack([lx, np.ones_like(lx)]).T
    return float(np.linalg.lstsq(A, ly, rcond=None)[0][0])


def check_class_membership(
    model: CovarianceModel,
    alpha: float,
    delta: float | None,
    grid: TimeGrid,
    delta_hat: float | None = None,
    n_shifts: int = 8,
    exponent_tol: float = 0.1,
    ratio_cap: float = 1e6,
) -> ClassReport:
    """Numerically check the four conditions on shifted increments ``Y_t = X_{t+u} - X_u``.

    Shifts ``u`` are ``n_shifts`` grid points spread over ``[T - delta, T - h]``.
    Condition (2) is judged by the log-log slope of the worst-case incremental
    variance over lags ``<= delta_hat`` (the fitted Hölder exponent, half the
    slope, must reach ``alpha - exponent_tol``),
    and the fitted constant ``C`` is reported alongside.
    """
    T = grid.horizon
    if not grid.is_uniform:
        raise ValueError("class membership checks need a uniform grid")
    delta = T / 2 if delta is None else float(delta)
    delta_hat = T / 4 if delta_hat is None else float(delta_hat)
    if not 0.0 < delta < T:
        raise ValueError(f"delta must lie in (0, T={T}), got {delta}")
    h = grid.step
    t = grid.points
    first = grid.index_at_or_after(T - delta)
    window_idx = np.arange(first, grid.n_cells)
    if window_idx.size < n_shifts:
        raise ValueError(
            f"grid too coarse: [T - delta, T) holds {window_idx.size} points, need {n_shifts}"
        )
    pick = np.unique(np.round(np.linspace(0, window_idx.size - 1, n_shifts)).astype(int))
    shift_idx = window_idx[pick]

    min_R = np.inf
    C_max = 0.0
    slope_min = np.inf
    c_min = np.inf
    ratio_max = 0.0
    for iu in shift_idx:
        u = t[iu]
        m = grid.n_cells - iu
        lags = np.arange(1, m + 1) * h
        local = t[iu + 1 :]
        VY = model.incr_var(local, u)  # V_Y(s) = W(u + s, u)
        WY = model.incr_var(local[:, None], local[None, :])
        WY[np.diag_indices(m)] = 0.0
        RY = 0.5 * (VY[:, None] + VY[None, :] - WY)
        min_R = min(min_R, float(RY.min()))

        # worst-case incremental variance by lag, including start point s = 0
        full = np.concatenate([[u], local])
        W_all = model.incr_var(full[:, None], full[None, :])
        wstar = np.array([np.max(np.diagonal(W_all, offset=j)) for j in range(1, m + 1)])
        C_max = max(C_max, float(np.max(wstar / lags ** (2 * alpha))))
        sel = (lags <= delta_hat + 1e-12) & (wstar > 0)
        if sel.sum() >= 3:
            slope_min = min(slope_min, _loglog_slope(lags[sel], wstar[sel]))

        near = lags <= delta_hat + 1e-12
        c_min = min(c_min, float(np.min(VY[near] / lags[near] ** 2)))

        jt = np.nonzero(lags < 2 * delta_hat - 1e-12)[0]
        for j in jt:
            ks = np.nonzero((lags >= lags[j] / 2 - 1e-12) & (lags <= lags[j] + 1e-12))[0]
            den = RY[j, ks]
            num = RY[ks, ks]
            with np.errstate(divide="ignore"):
                r = np.where(den > 0, num / den, np.inf)
            ratio_max = max(ratio_max, float(np.max(r)))

    exponent = slope_min / 2.0 if np.isfinite(slope_min) else float("nan")
    return ClassReport(
        positive_covariance=bool(min_R > 0.0),
        holder_bound=bool(np.isfinite(C_max) and exponent >= alpha - exponent_tol),
        quadratic_lower_bound=bool(c_min > 0.0),
        bounded_ratio=bool(ratio_max <= ratio_cap),
        C=C_max,
        holder_exponent=exponent,
        c=c_min,
        ratio_sup=ratio_max,
        min_increment_covariance=min_R,
        alpha=float(alpha),
        window=(T - delta, T),
        delta_hat=delta_hat,
        shifts=[float(t[i]) for i in shift_idx],
        n_cells=grid.n_cells,
    )


@dataclass
class SmallBallConditionReport:
    doubling_ratio: float
    doubling_ok: bool
    min_margin: float
    lattice_ok: bool
    n_pairs: int
    worst_pair: tuple[float, int] | None

    @property
    def passed(self) -> bool:
        return self.doubling_ok and self.lattice_ok

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["passed"] = self.passed
        return d


def check_smallball_conditions(
    model, grid: TimeGrid, window: float = 1.0, rtol: float = 1e-12
) -> SmallBallConditionReport:
    """Sufficient conditions for the small-ball upper bound on a lag-only ``W(0, x)``.

    ``model`` is a stationary or stationary-increment model, or a plain callable
    ``W(0, x)``.  ``window`` rescales time so the conditions are checked for
    ``x -> W(0, window * x)`` on ``[0, 1]``.  The lattice is ``x = k / N`` with
    ``N = grid.n_cells``, and ``2 <= j <= 1/x - 2``.
    """
    if isinstance(model, CovarianceModel):
        if model.structure not in (STATIONARY, STATIONARY_INCREMENTS):
            raise ValueError(
                f"{model.tag}: neither stationary nor stationary increments; "
                "the small-ball criterion needs a lag-only incremental variance"
            )
        base = model.w0
    elif callable(model):
        base = model
    else:
        raise TypeError("expected a covariance model or a callable W(0, x)")

    def W(x):
        return np.asarray(base(window * np.asarray(x, dtype=float)), dtype=float)

    N = grid.n_cells
    xs = np.arange(1, N // 2 + 1) / N
    wx = W(xs)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = W(2 * xs) / wx
    ratio = float(np.max(ratios)) if np.all(wx > 0) else float("inf")
    doubling_ok = bool(0.0 < np.min(ratios) and ratio < 4.0)

    min_margin = np.inf
    worst = None
    n_pairs = 0
    for k in range(1, N // 4 + 1):
        x = k / N
        jmax = int(np.floor(1.0 / x + 1e-9)) - 2
        if jmax < 2:
            continue
        j = np.arange(2, jmax + 1)
        terms = [W(j * x), W((j + 2) * x), W((j - 2) * x), W((j + 1) * x), W((j - 1) * x)]
        lhs = 6 * terms[0] + terms[1] + terms[2]
        rhs = 4 * terms[3] + 4 * terms[4]
        scale = np.abs(lhs) + np.abs(rhs)
        margin = (lhs - rhs) / np.where(scale > 0, scale, 1.0)
        n_pairs += j.size
        i = int(np.argmin(margin))
        if margin[i] < min_margin:
            min_margin = float(margin[i])
            worst = (float(x), int(j[i]))
    return SmallBallConditionReport(
        doubling_ratio=ratio,
        doubling_ok=doubling_ok,
        min_margin=min_margin,
        lattice_ok=bool(min_margin >= -rtol * 10),
        n_pairs=n_pairs,
        worst_pair=worst,
    )
