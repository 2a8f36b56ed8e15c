"""Fractional calculus on grids: Besov norms, Weyl derivatives, GLS integral.

All singular integrals use product integration: the function is replaced by
its piecewise-linear interpolant on the grid and the power kernel is
integrated exactly on every cell.  Derivative values at the singular end
point (``s = 0`` for left operators, ``s = t`` for right ones) are set to 0.

The right-sided operators are real valued.  With this convention the
generalised Lebesgue-Stieltjes integral reads

    int_0^t f dg = f(0) (g(t) - g(0)) - int_0^t D^b_{0+}[f - f(0)](s) D^{1-b}_{t-}[g_{t-}](s) ds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .grid import GridFunction, TimeGrid

OVERFLOW_SENTINEL = 1e12
DERIVATIVE_GROWTH_LIMIT = 10.0
W1_GROWTH_LIMIT = 0.05


class InadmissibleOrderError(ValueError):
    """The fractional order is not admissible for the regularity of the data."""


def _check_order(beta: float) -> None:
    if not 0.0 < beta < 1.0:
        raise ValueError(f"fractional order must lie in (0, 1), got {beta}")


# ---------------------------------------------------------------------------
# core kernels on raw arrays; values may carry leading batch dimensions
# ---------------------------------------------------------------------------


def _weyl_left_uniform(h: float, f: np.ndarray, beta: float) -> np.ndarray:
    n = f.shape[-1] - 1
    d = np.arange(n + 1, dtype=float)
    P = np.zeros(n + 1)
    Q = np.zeros(n + 1)
    dd = d[2:]
    P[2:] = ((dd - 1) ** -beta - dd**-beta) * h**-beta / beta
    Q[1:] = (d[1:] ** (1 - beta) - (d[1:] - 1) ** (1 - beta)) * h ** (1 - beta) / (1 - beta)
    C = Q - d * h * P
    S = np.cumsum(P)
    m = np.diff(f, axis=-1) / h
    fp = fftconvolve(f, np.broadcast_to(P, f.shape[:-1] + P.shape), axes=-1)[..., : n + 1]
    # C[0] = 0, so the full convolution already only sums cells j < k
    mc = fftconvolve(m, np.broadcast_to(C, m.shape[:-1] + C.shape), axes=-1)[..., : n + 1]
    incr = f * S - fp + mc
    s = d * h
    out = np.zeros_like(f)
    out[..., 1:] = (f[..., 1:] / s[1:] ** beta + beta * incr[..., 1:]) / math.gamma(1 - beta)
    return out


def _weyl_left_general(t: np.ndarray, f: np.ndarray, beta: float) -> np.ndarray:
    out = np.zeros_like(f)
    h = np.diff(t)
    m = np.diff(f, axis=-1) / h
    for k in range(1, t.size):
        a = t[k] - t[1 : k + 1]
        b = t[k] - t[:k]
        P = np.zeros(k)
        P[:-1] = (a[:-1] ** -beta - b[:-1] ** -beta) / beta
        Q = (b ** (1 - beta) - a ** (1 - beta)) / (1 - beta)
        c = Q - b * P
        fk = f[..., k : k + 1]
        incr = np.sum((fk - f[..., :k]) * P + m[..., :k] * c, axis=-1)
        out[..., k] = (f[..., k] / t[k] ** beta + beta * incr) / math.gamma(1 - beta)
    return out


def weyl_left(t: np.ndarray, f: np.ndarray, beta: float, uniform: bool | None = None) -> np.ndarray:
    """Left Weyl derivative of order ``beta`` at every grid point (array level)."""
    _check_order(beta)
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    if uniform is None:
        d = np.diff(t)
        uniform = bool(np.allclose(d, d[0], rtol=1e-9, atol=0.0))
    if uniform:
        return _weyl_left_uniform(t[-1] / (t.size - 1), f, beta)
    return _weyl_left_general(t, f, beta)


def weyl_right(t: np.ndarray, g: np.ndarray, order: float, k_end: int | None = None) -> np.ndarray:
    """Right Weyl derivative of ``g_{t-}`` on ``[0, t_{k_end}]`` (array level).

    Computed as the left derivative of the time-reversed, re-anchored function.
    """
    t = np.asarray(t, dtype=float)
    g = np.asarray(g, dtype=float)
    K = t.size - 1 if k_end is None else int(k_end)
    tt = t[: K + 1]
    gg = g[..., : K + 1]
    rev_t = tt[-1] - tt[::-1]
    rev_t[0] = 0.0
    rev_g = gg[..., ::-1] - gg[..., -1:]
    return weyl_left(rev_t, rev_g, order)[..., ::-1]


def _power_cell_integrals(A, m, a, b, beta):
    """``int_a^b |A + m w| w^(-1-beta) dw`` for ``a > 0`` (broadcasting)."""

    def G(w):
        return -A * w**-beta / beta + m * w ** (1 - beta) / (1 - beta)

    with np.errstate(divide="ignore", invalid="ignore"):
        w0 = np.where(m != 0, -A / np.where(m != 0, m, 1.0), -1.0)
    split = (w0 > a) & (w0 < b)
    w0 = np.where(split, w0, b)
    Ga, Gb, G0 = G(a), G(b), G(w0)
    return np.where(split, np.abs(G0 - Ga) + np.abs(Gb - G0), np.abs(Gb - Ga))


def _besov_inner(t: np.ndarray, f: np.ndarray, beta: float) -> np.ndarray:
    """``J(s_k) = int_0^{s_k} |f(s_k) - f(u)| (s_k - u)^(-1-beta) du`` for every k."""
    J = np.zeros_like(f)
    h = np.diff(t)
    m = np.diff(f, axis=-1) / h
    for k in range(1, t.size):
        last = np.abs(m[..., k - 1]) * h[k - 1] ** (1 - beta) / (1 - beta)
        if k > 1:
            a = t[k] - t[1:k]
            b = t[k] - t[: k - 1]
            mk = m[..., : k - 1]
            A = f[..., k : k + 1] - f[..., : k - 1] - mk * b
            J[..., k] = np.sum(_power_cell_integrals(A, mk, a, b, beta), axis=-1) + last
        else:
            J[..., k] = last
    return J


def _besov_boundary(t: np.ndarray, f: np.ndarray, beta: float) -> np.ndarray:
    """Cumulative ``int_0^{s_k} |f(s)| s^(-beta) ds`` with |f| interpolated linearly."""
    af = np.abs(f)
    u0, u1 = t[:-1], t[1:]
    mp = np.diff(af, axis=-1) / (u1 - u0)
    cell = (af[..., :-1] - mp * u0) * (u1 ** (1 - beta) - u0 ** (1 - beta)) / (1 - beta) + mp * (
        u1 ** (2 - beta) - u0 ** (2 - beta)
    ) / (2 - beta)
    out = np.zeros_like(f)
    out[..., 1:] = np.cumsum(cell, axis=-1)
    return out


def _trapz_cumulative(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y)
    out[..., 1:] = np.cumsum(0.5 * (y[..., 1:] + y[..., :-1]) * np.diff(t), axis=-1)
    return out


# ---------------------------------------------------------------------------
# public operations on grid functions
# ---------------------------------------------------------------------------


def besov_norm_w2_profile(f: GridFunction, beta: float) -> np.ndarray:
    """``||f||_{s_k, beta}`` for every grid point ``s_k``."""
    _check_order(beta)
    t = f.grid.points
    return _besov_boundary(t, f.values, beta) + _trapz_cumulative(
        t, _besov_inner(t, f.values, beta)
    )


def besov_norm_w2(f: GridFunction, beta: float, t: float | None = None) -> float:
    """The two-term norm ``int |f|/s^b ds + int int |f(s)-f(u)|/(s-u)^(1+b) du ds`` on ``[0, t]``."""
    if t is not None:
        f = f.restrict(t)
    return float(besov_norm_w2_profile(f, beta)[-1])


@dataclass(frozen=True)
class W1Norm:
    value: float
    overflow: bool
    growth: float
    levels: tuple[float, ...]


def _w1_value(t: np.ndarray, g: np.ndarray, beta: float) -> float:
    n = t.size - 1
    h = np.diff(t)
    m = np.diff(g) / h
    best = 0.0
    for i in range(n):
        s = t[i]
        a = t[i:-1] - s
        b = t[i + 1 :] - s
        mj = m[i:]
        A = g[i:-1] - g[i] - mj * a
        cells = np.empty(n - i)
        cells[0] = abs(mj[0]) * b[0] ** (1 - beta) / (1 - beta)
        if n - i > 1:
            cells[1:] = _power_cell_integrals(A[1:], mj[1:], a[1:], b[1:], beta)
        quot = np.abs(g[i + 1 :] - g[i]) / b**beta
        best = max(best, float(np.max(quot + np.cumsum(cells))))
    return best


def besov_norm_w1(g: GridFunction, beta: float, levels: int = 3) -> W1Norm:
    """Grid supremum of the Hölder-quotient-plus-integral expression.

    Membership cannot be decided on one grid, so the value is also computed on
    ``levels - 1`` dyadic coarsenings.  The growth exponent is the slope of
    ``log value`` against ``log(1/h)``; growth above 0.05 (or a non-finite or
    huge value) sets ``overflow`` and the value is capped at a sentinel.
    """
    _check_order(beta)
    vals = []
    for lev in range(levels):
        factor = 2**lev
        if g.grid.n_cells % factor or g.grid.n_cells // factor < 2:
            break
        gc = g.coarsen(factor) if factor > 1 else g
        vals.append(_w1_value(gc.grid.points, gc.values, beta))
    v0 = vals[0]
    growth = 0.0
    if len(vals) >= 2 and all(v > 0 for v in vals):
        x = np.log(2.0) * np.arange(len(vals))  # log(1/h) relative to finest, reversed
        growth = float(-np.polyfit(x, np.log(vals), 1)[0])
    overflow = (not np.isfinite(v0)) or v0 > OVERFLOW_SENTINEL or growth > W1_GROWTH_LIMIT
    value = min(v0, OVERFLOW_SENTINEL) if np.isfinite(v0) else OVERFLOW_SENTINEL
    return W1Norm(value, bool(overflow), growth, tuple(vals))


def rl_derivative_left(f: GridFunction, beta: float, subtract_initial: bool = False) -> GridFunction:
    """Left Riemann-Liouville derivative through the Weyl representation."""
    vals = f.values - f.values[0] if subtract_initial else f.values
    return GridFunction(f.grid, weyl_left(f.grid.points, vals, beta, f.grid.is_uniform))


def rl_derivative_right(g: GridFunction, order: float, t: float | None = None) -> GridFunction:
    """Right derivative of ``g_{t-}(s) = g(s) - g(t)`` on ``[0, t]`` (real valued)."""
    k = g.grid.n_cells if t is None else g.grid.index(t)
    vals = weyl_right(g.grid.points, g.values, order, k)
    return GridFunction(TimeGrid(g.grid.points[: k + 1]), vals)


def rl_integral_left(f: GridFunction, beta: float) -> GridFunction:
    """Left Riemann-Liouville fractional integral of order ``beta`` (product rule)."""
    if beta <= 0:
        raise ValueError("integral order must be positive")
    t = f.grid.points
    fv = f.values
    m = np.diff(fv) / np.diff(t)
    out = np.zeros_like(fv)
    for k in range(1, t.size):
        a = t[k] - t[1 : k + 1]
        b = t[k] - t[:k]
        A = fv[:k] + m[:k] * b
        cell = A * (b**beta - a**beta) / beta - m[:k] * (b ** (beta + 1) - a ** (beta + 1)) / (beta + 1)
        out[k] = np.sum(cell) / math.gamma(beta)
    return GridFunction(f.grid, out)


def derivative_growth(t: np.ndarray, values: np.ndarray, order: float, side: str = "left") -> float:
    """Ratio of ``max |D|`` on the grid to ``max |D|`` on its 2x coarsening."""
    if (t.size - 1) % 2:
        raise ValueError("derivative growth check needs an even number of cells")
    if side == "left":
        fine = weyl_left(t, values, order)
        coarse = weyl_left(t[::2], values[::2], order)
    else:
        fine = weyl_right(t, values, order)
        coarse = weyl_right(t[::2], values[::2], order)
    cmax = float(np.max(np.abs(coarse)))
    fmax = float(np.max(np.abs(fine)))
    if cmax == 0.0:
        return 1.0 if fmax == 0.0 else float("inf")
    return fmax / cmax


def default_beta(alpha: float) -> float:
    """Splitting order for integrals against an ``alpha``-Hölder integrator.

    ``1 - alpha + min(alpha, 1/2) / 2``, pulled 5% of the window width inside
    the admissible window ``(1 - alpha, 1/2)``.
    """
    lo, hi = 1.0 - alpha, 0.5
    if not lo < hi:
        raise ValueError(f"no admissible splitting order for alpha={alpha}")
    margin = 0.05 * (hi - lo)
    return float(np.clip(1.0 - alpha + 0.5 * min(alpha, 0.5), lo + margin, hi - margin))


def _common(f: GridFunction, g: GridFunction, t: float | None):
    if f.grid != g.grid:
        raise ValueError("integrand and integrator must share a grid")
    k = f.grid.n_cells if t is None else f.grid.index(t)
    if k == 0:
        raise ValueError("t must be positive")
    return k


def gls_integral(
    f: GridFunction, g: GridFunction, beta: float, t: float | None = None, check: bool = False
) -> float:
    """Generalised Lebesgue-Stieltjes integral ``int_0^t f dg`` via fractional derivatives."""
    _check_order(beta)
    k = _common(f, g, t)
    tt = f.grid.points[: k + 1]
    fv = f.values[: k + 1]
    gv = g.values[: k + 1]
    if check:
        for side, vals, order in (("left", fv - fv[0], beta), ("right", gv, 1 - beta)):
            if k % 2 == 0 and derivative_growth(tt, vals, order, side) > DERIVATIVE_GROWTH_LIMIT:
                raise InadmissibleOrderError(
                    f"{side} derivative of order {order:g} grows more than "
                    f"{DERIVATIVE_GROWTH_LIMIT:g}x under refinement"
                )
    df = weyl_left(tt, fv - fv[0], beta)
    dg = weyl_right(tt, gv, 1 - beta)
    prod = df * dg
    quad = float(np.sum(0.5 * (prod[1:] + prod[:-1]) * np.diff(tt)))
    return float(fv[0] * (gv[-1] - gv[0]) - quad)


def gls_bound(f: GridFunction, g: GridFunction, beta: float, t: float | None = None) -> float:
    """``sup_s |D^{1-beta}_{t-} g_{t-}(s)| * ||f||_{t,beta}``."""
    _check_order(beta)
    k = _common(f, g, t)
    tt = f.grid.points[: k + 1]
    dg = weyl_right(tt, g.values[: k + 1], 1 - beta)
    norm = besov_norm_w2(GridFunction(TimeGrid(tt), f.values[: k + 1]), beta)
    return float(np.max(np.abs(dg)) * norm)


ROUNDOFF_FLOOR = 1e-10


def power_oracle_errors(mu: float, beta: float, n: int = 2**12, s_min: float = 0.1) -> tuple[float, float]:
    """Max relative error of the left derivative of ``s^mu`` on ``[s_min, 1]``.

    Returns the errors on the ``n``-cell grid and on its 2x coarsening; the
    exact value is ``Gamma(mu+1) / Gamma(mu+1-beta) s^(mu-beta)``.
    """
    out = []
    for cells in (n, n // 2):
        grid = TimeGrid.uniform(1.0, cells)
        s = grid.points
        D = rl_derivative_left(GridFunction(grid, s**mu), beta).values
        m = s >= s_min - 1e-12
        exact = math.gamma(mu + 1) / math.gamma(mu + 1 - beta) * s[m] ** (mu - beta)
        out.append(float(np.max(np.abs(D[m] / exact - 1.0))))
    return out[0], out[1]


def refines(fine: float, coarse: float) -> bool:
    """Error decreases under refinement, or both sit at the rounding floor."""
    return fine < coarse or max(fine, coarse) <= ROUNDOFF_FLOOR
