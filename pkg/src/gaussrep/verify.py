"""Monte Carlo checks: small-ball decay, crossing probabilities, KS tests, zero-integral demo."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import rng
from .gp_sim import CovarianceModel, sample_paths, sample_points
from .grid import GridFunction, TimeGrid
from .pathwise import forward_sum, integrate_step
from .replicate import HolderParams, HolderTarget, default_holder_params, replicate_holder


@dataclass(frozen=True)
class EstimateWithCI:
    estimate: float
    se: float
    count: int
    level: float
    lower: float
    upper: float

    def __post_init__(self) -> None:
        if self.count <= 0:
            raise ValueError("an estimate needs at least one sample")

    @property
    def hits(self) -> int:
        return int(round(self.estimate * self.count))

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("estimate", "se", "count", "level", "lower", "upper")}


def proportion(hits: int, count: int, level: float = 0.95) -> EstimateWithCI:
    """Binomial proportion with a Clopper-Pearson interval (one-sided when ``hits`` is 0)."""
    if count <= 0:
        raise ValueError("count must be positive")
    p = hits / count
    se = math.sqrt(p * (1 - p) / count)
    if hits == 0:
        lo, hi = 0.0, 1.0 - (1.0 - level) ** (1.0 / count)
    else:
        ci = stats.binomtest(int(hits), int(count)).proportion_ci(level, method="exact")
        lo, hi = float(ci.low), float(ci.high)
    return EstimateWithCI(p, se, int(count), level, lo, hi)


def mean_estimate(values, level: float = 0.95) -> EstimateWithCI:
    v = np.asarray(values, dtype=float)
    m = float(v.mean())
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    z = stats.norm.ppf(0.5 + level / 2)
    return EstimateWithCI(m, se, int(v.size), level, m - z * se, m + z * se)


# ---------------------------------------------------------------------------
# small balls
# ---------------------------------------------------------------------------


def _increment_sup(model: CovarianceModel, s: float, t: float, count: int, seed: int, n_steps: int) -> np.ndarray:
    pts = np.linspace(s, t, n_steps + 1)
    gen = rng.stream(seed, "smallball", n_steps)
    x = sample_points(model, pts, count, gen)
    return np.max(np.abs(x - x[:, :1]), axis=1)


def smallball_estimate(
    model: CovarianceModel,
    s: float,
    t: float,
    eps,
    count: int,
    seed: int,
    n_steps: int = 1024,
    level: float = 0.95,
):
    """``P(max_{grid u in [s, t]} |X_u - X_s| <= eps)``; one estimate per ``eps`` (same paths)."""
    if not s < t:
        raise ValueError("need s < t")
    eps_arr = np.atleast_1d(np.asarray(eps, dtype=float))
    if np.any(eps_arr <= 0):
        raise ValueError("eps must be positive")
    sup = _increment_sup(model, s, t, count, seed, n_steps)
    out = [proportion(int(np.sum(sup <= e)), count, level) for e in eps_arr]
    return out[0] if np.ndim(eps) == 0 else out


@dataclass(frozen=True)
class ShapeFit:
    slope: float
    se: float
    t_stat: float
    used: int
    upper_constant: float  # largest C with p <= exp(-C D eps^-1/alpha) at every used eps
    lower_constant: float  # smallest K with p >= exp(-K D eps^-1/alpha)


def usable_points(estimates, min_hits: int = 10) -> np.ndarray:
    """Mask of estimates with at least ``min_hits`` hits and ``p < 1``."""
    p = np.array([e.estimate for e in estimates])
    n = np.array([e.count for e in estimates])
    return (p * n >= min_hits) & (p < 1.0)


def fit_smallball_shape(
    estimates, eps, alpha: float, span: float, min_hits: int = 10, keep: np.ndarray | None = None
) -> ShapeFit:
    """Weighted regression of ``log p`` on ``eps^(-1/alpha)`` (delta-method weights)."""
    eps = np.asarray(eps, dtype=float)
    p = np.array([e.estimate for e in estimates])
    n = np.array([e.count for e in estimates])
    keep = usable_points(estimates, min_hits) if keep is None else keep & usable_points(estimates, 1)
    if keep.sum() < 3:
        raise ValueError("fewer than three usable small-ball points")
    x = eps[keep] ** (-1.0 / alpha)
    y = np.log(p[keep])
    w = n[keep] * p[keep] / (1.0 - p[keep])
    X = np.column_stack([np.ones_like(x), x])
    XtW = X.T * w
    cov = np.linalg.inv(XtW @ X)
    beta = cov @ XtW @ y
    resid = y - X @ beta
    dof = max(int(keep.sum()) - 2, 1)
    scale = max(float(np.sum(w * resid**2)) / dof, 1.0)
    se = math.sqrt(cov[1, 1] * scale)
    rate = -y / (span * x)
    return ShapeFit(float(beta[1]), se, float(beta[1] / se), int(keep.sum()), float(rate.min()), float(rate.max()))


@dataclass(frozen=True)
class SmallBallReport:
    eps: np.ndarray
    coarse: list
    fine: list
    fit_coarse: ShapeFit
    fit_fine: ShapeFit

    @property
    def slopes_agree(self) -> bool:
        a, b = self.fit_coarse, self.fit_fine
        return abs(a.slope - b.slope) <= 1.96 * math.hypot(a.se, b.se)

    @property
    def passed(self) -> bool:
        return all(f.slope < 0 and abs(f.t_stat) > 3 for f in (self.fit_coarse, self.fit_fine)) and self.slopes_agree

    def as_dict(self) -> dict:
        def fit(f):
            return {k: getattr(f, k) for k in ShapeFit.__dataclass_fields__}

        return {
            "eps": self.eps.tolist(),
            "p_coarse": [e.estimate for e in self.coarse],
            "p_fine": [e.estimate for e in self.fine],
            "fit_coarse": fit(self.fit_coarse),
            "fit_fine": fit(self.fit_fine),
            "slopes_agree": self.slopes_agree,
            "passed": self.passed,
        }


def smallball_shape(
    model: CovarianceModel,
    s: float,
    t: float,
    eps,
    count: int,
    seed: int,
    n_steps: int = 1024,
) -> SmallBallReport:
    """Shape regression on the grid and again at half the step, on the same ``eps`` points."""
    eps = np.asarray(eps, dtype=float)
    coarse = smallball_estimate(model, s, t, eps, count, seed, n_steps)
    fine = smallball_estimate(model, s, t, eps, count, seed, 2 * n_steps)
    keep = usable_points(coarse) & usable_points(fine)
    a = model.alpha
    return SmallBallReport(
        eps,
        coarse,
        fine,
        fit_smallball_shape(coarse, eps, a, t - s, keep=keep),
        fit_smallball_shape(fine, eps, a, t - s, keep=keep),
    )


# ---------------------------------------------------------------------------
# crossing probabilities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CrossingReport:
    s: float
    t: float
    empirical: EstimateWithCI
    reverse: EstimateWithCI
    bound: float
    implied_C: float
    symmetric: bool

    def as_dict(self) -> dict:
        return {
            "s": self.s,
            "t": self.t,
            "empirical": self.empirical.estimate,
            "se": self.empirical.se,
            "reverse": self.reverse.estimate,
            "bound": self.bound,
            "implied_C": self.implied_C,
            "symmetric": self.symmetric,
        }


def crossing_bound_shape(model: CovarianceModel, s: float, t: float) -> float:
    """``sqrt(W(t, s) / V(s)) (1 + R(s, s) / R(t, s))``."""
    r = float(model.cov(t, s))
    if r <= 0:
        raise ValueError(f"R(t, s) = {r:g} <= 0: the crossing bound does not apply")
    return math.sqrt(float(model.incr_var(t, s)) / float(model.var(s))) * (1.0 + float(model.var(s)) / r)


def crossing_check(model: CovarianceModel, s: float, t: float, count: int, seed: int) -> CrossingReport:
    """``P(X_s < 0 < X_t)`` from exact draws of the pair ``(X_s, X_t)``."""
    if not 0 < s <= t:
        raise ValueError("need 0 < s <= t")
    if t == s:
        # the pair is degenerate: no crossing and W(t, t) = 0
        zero = proportion(0, count)
        return CrossingReport(s, t, zero, zero, 0.0, 0.0, True)
    bound = crossing_bound_shape(model, s, t)
    gen = rng.stream(seed, "crossing", int(round(s * 1e9)), int(round(t * 1e9)))
    xy = sample_points(model, np.array([s, t]), count, gen)
    up = int(np.sum((xy[:, 0] < 0) & (xy[:, 1] > 0)))
    down = int(np.sum((xy[:, 0] > 0) & (xy[:, 1] < 0)))
    emp, rev = proportion(up, count), proportion(down, count)
    p, q = emp.estimate, rev.estimate
    se_diff = math.sqrt(max(p + q - (p - q) ** 2, 0.0) / count)
    symmetric = abs(p - q) <= 3 * se_diff if se_diff > 0 else p == q
    implied = p / bound if bound > 0 else 0.0
    return CrossingReport(s, t, emp, rev, bound, implied, bool(symmetric))


def crossing_probability_exact(model: CovarianceModel, s: float, t: float) -> float:
    """``arccos(rho) / (2 pi)`` for a centred Gaussian pair with correlation ``rho``."""
    rho = float(model.cov(s, t)) / math.sqrt(float(model.var(s)) * float(model.var(t)))
    return math.acos(min(max(rho, -1.0), 1.0)) / (2 * math.pi)


@dataclass(frozen=True)
class CrossingSweep:
    reports: list
    ratio: float

    @property
    def symmetric(self) -> bool:
        return all(r.symmetric for r in self.reports)

    def passed(self, max_ratio: float = 10.0) -> bool:
        return self.ratio <= max_ratio and self.symmetric


def crossing_sweep(model: CovarianceModel, s: float, lags, count: int, seed: int) -> CrossingSweep:
    reps = [crossing_check(model, s, s + lag, count, seed) for lag in lags]
    c = np.array([r.implied_C for r in reps])
    ratio = float(c.max() / c.min()) if c.min() > 0 else float("inf")
    return CrossingSweep(reps, ratio)


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov
# ---------------------------------------------------------------------------


def kolmogorov_pvalue(lam: float, terms: int = 100) -> float:
    """Asymptotic ``P(sqrt(n) D > lam) = 2 sum (-1)^(k-1) exp(-2 k^2 lam^2)``."""
    if lam < 0.2:
        return 1.0
    k = np.arange(1, terms + 1)
    p = 2.0 * np.sum((-1.0) ** (k - 1) * np.exp(-2.0 * k**2 * lam**2))
    return float(min(max(p, 0.0), 1.0))


def ks_test(samples, cdf) -> tuple[float, float]:
    """One-sample KS distance against ``cdf`` and its asymptotic p-value."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n < 50:
        raise ValueError(f"need at least 50 samples, got {n}")
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    D = float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))
    D = min(max(D, 0.0), 1.0)
    sq = math.sqrt(n)
    return D, kolmogorov_pvalue((sq + 0.12 + 0.11 / sq) * D)


# ---------------------------------------------------------------------------
# zero integral demonstration
# ---------------------------------------------------------------------------


@dataclass
class ZeroIntegralReport:
    K: float
    t1: float
    integral_gap: np.ndarray  # |int (u1 - u2) dX| per path, forward sums
    ito_gap: np.ndarray  # same with the u1 integral booked by the Itô formula
    occupation: np.ndarray  # Lebesgue measure of {s <= t1 : X_s > K} per path
    degenerate: bool
    replication_error: np.ndarray
    fou_gap: np.ndarray = field(default_factory=lambda: np.zeros(0))
    fou_theta: float = 1.0

    @property
    def median_gap(self) -> float:
        return float(np.median(self.integral_gap))

    @property
    def mean_occupation(self) -> float:
        return float(np.mean(self.occupation))

    def passed(self, gap_tol: float = 0.05, occupation_min: float = 0.01) -> bool:
        return (not self.degenerate) and self.median_gap <= gap_tol and self.mean_occupation >= occupation_min

    def summary(self) -> dict:
        return {
            "K": self.K,
            "t1": self.t1,
            "paths": int(self.integral_gap.size),
            "median_gap": self.median_gap,
            "median_ito_gap": float(np.median(self.ito_gap)),
            "mean_occupation": self.mean_occupation,
            "degenerate": self.degenerate,
            "median_replication_error": float(np.median(self.replication_error)),
            "fou_theta": self.fou_theta,
            "median_fou_gap": float(np.median(self.fou_gap)) if self.fou_gap.size else None,
            "passed": self.passed(),
        }


def fou_path(B: GridFunction, theta: float) -> np.ndarray:
    """``U_t = int_0^t e^{-theta (t - s)} dB_s`` as forward sums at every grid time."""
    t = B.grid.points
    acc = np.concatenate(([0.0], np.cumsum(np.exp(theta * t[:-1]) * np.diff(B.values))))
    return np.exp(-theta * t) * acc


def zero_integral_demo(
    model: CovarianceModel,
    K: float,
    grid: TimeGrid,
    params: HolderParams | None = None,
    seed: int = 0,
    count: int = 200,
    delta: float | None = None,
    theta: float | None = 1.0,
) -> ZeroIntegralReport:
    """Two integrands with (nearly) the same integral of ``(X_T - K)^+``.

    ``u1`` replicates ``Z_t = (X_t - K)^+`` and vanishes on ``[0, t1]``;
    ``u2 = 1_{X > K}`` is the Itô-formula integrand, non-zero on ``[0, t1]``
    whenever the path visits ``(K, inf)`` there.
    """
    if K < 0:
        raise ValueError("K must be non-negative so that X_0 <= K")
    params = params or default_holder_params(model.alpha, model.alpha - 0.05)
    batch = sample_paths(model, grid, count, seed)
    target = HolderTarget("function", func=lambda x: np.maximum(x - K, 0.0))
    gaps, ito_gaps, occ, errs, fou = [], [], [], [], []
    crossed = False
    h = np.diff(grid.points)
    for X in batch:
        out = replicate_holder(target, model, X, params, delta=delta)
        t1 = out.diagnostics["t1"]
        u2 = (X.values > K).astype(float)
        i2 = forward_sum(u2, X.values)
        gaps.append(abs(integrate_step(out.integrand, X) - i2))
        ito_gaps.append(abs(out.achieved - i2))
        k1 = grid.index_at_or_after(t1)
        occ.append(float(np.sum(h[:k1] * u2[:k1])))
        errs.append(out.error)
        crossed = crossed or bool(u2.any())
        if theta is not None:
            z = fou_path(X, theta)
            rep = replicate_holder(HolderTarget("auxiliary", values=z), model, X, params, delta=delta)
            fou.append(abs(integrate_step(rep.integrand, X) - z[-1]))
    return ZeroIntegralReport(
        float(K),
        float(t1),
        np.asarray(gaps),
        np.asarray(ito_gaps),
        np.asarray(occ),
        not crossed,
        np.asarray(errs),
        np.asarray(fou),
        float(theta) if theta is not None else float("nan"),
    )

