import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaussrep import GridFunction, TimeGrid, sample_paths
from gaussrep.frac_calc import (
    InadmissibleOrderError,
    besov_norm_w1,
    besov_norm_w2,
    default_beta,
    gls_bound,
    gls_integral,
    power_oracle_errors,
    refines,
    rl_derivative_left,
    rl_derivative_right,
    rl_integral_left,
    weyl_left,
)


def grid(n=1024, T=1.0):
    return TimeGrid.uniform(T, n)


def fn(g, values):
    return GridFunction(g, values)


@pytest.mark.parametrize("mu", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("beta", [0.25, 0.5, 0.75])
def test_power_oracle(mu, beta):
    fine, coarse = power_oracle_errors(mu, beta, 2**12)
    assert fine <= 1e-3
    assert refines(fine, coarse)


def test_constant_derivative_is_inverse_sqrt_pi():
    g = grid()
    d = rl_derivative_left(fn(g, np.ones(len(g))), 0.5)
    assert d(1.0) == pytest.approx(1 / math.sqrt(math.pi), rel=1e-12)
    assert d.values[0] == 0.0


def test_linear_derivative():
    g = grid()
    assert rl_derivative_left(fn(g, g.points), 0.5)(1.0) == pytest.approx(2 / math.sqrt(math.pi), rel=1e-10)


def test_uniform_and_general_kernels_agree():
    g = grid(300)
    f = np.sin(4 * g.points) + np.sqrt(g.points)
    a = weyl_left(g.points, f, 0.35, uniform=True)
    b = weyl_left(g.points, f, 0.35, uniform=False)
    np.testing.assert_allclose(a, b, atol=1e-11)


def test_left_inverse_property():
    errs = []
    for n in (256, 512, 1024):
        g = grid(n)
        back = rl_derivative_left(rl_integral_left(fn(g, g.points), 0.5), 0.5)
        errs.append(np.max(np.abs(back.values - g.points)[g.points >= 0.1]))
    assert errs[0] > errs[1] > errs[2]
    assert errs[-1] < 1e-4


def test_right_derivative_of_constant_vanishes():
    g = grid(128)
    d = rl_derivative_right(fn(g, np.full(len(g), 3.0)), 0.5, 1.0)
    assert np.all(d.values == 0.0)


def test_right_derivative_closed_form():
    # g(s) = t - s gives g_{t-}(s) = t - s, whose right derivative of order 1/2 is (t-s)^(1/2) / Gamma(3/2)
    g = grid(2048)
    t = 0.75
    d = rl_derivative_right(fn(g, 1.0 - g.points), 0.5, t)
    s = d.grid.points
    exact = (t - s) ** 0.5 / math.gamma(1.5)
    np.testing.assert_allclose(d.values, exact, atol=1e-10)


def test_right_derivative_of_fbm_path_is_stable(fbm):
    g = grid(2048)
    x = sample_paths(fbm, g, 5, seed=17)
    for p in x:
        fine = np.max(np.abs(rl_derivative_right(p, 0.6).values))
        coarse = np.max(np.abs(rl_derivative_right(p.coarsen(2), 0.6).values))
        assert fine / coarse < 1.5


def test_besov_w2_values():
    g = grid(512)
    assert besov_norm_w2(fn(g, np.zeros(len(g))), 0.5) == 0.0
    assert besov_norm_w2(fn(g, np.full(len(g), 2.0)), 0.5) == pytest.approx(4.0, rel=1e-12)


def test_besov_w2_linear_closed_form():
    # int_0^1 s^{1-b} ds + int_0^1 int_0^s (s-u)^{-b} du ds with b = 1/4
    b = 0.25
    exact = 1 / (2 - b) + 1 / ((1 - b) * (2 - b))
    errs = [abs(besov_norm_w2(fn(grid(n), grid(n).points), b) - exact) for n in (128, 256, 512)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[-1] < 1e-5


def test_besov_w2_restriction():
    g = grid(256)
    f = fn(g, np.full(len(g), 1.0))
    assert besov_norm_w2(f, 0.5, t=0.25) == pytest.approx(0.25**0.5 / 0.5, rel=1e-12)


def test_besov_w1_values():
    g = grid(256, T=2.0)
    assert besov_norm_w1(fn(g, np.zeros(len(g))), 0.5).value == 0.0
    r = besov_norm_w1(fn(g, g.points), 0.5)
    assert r.value == pytest.approx(3 * math.sqrt(2.0), rel=1e-10)
    assert not r.overflow


def test_besov_w1_overflow_for_rough_order(fbm):
    g = grid(1024)
    paths = sample_paths(fbm, g, 20, seed=4)
    flags = [besov_norm_w1(p, 0.9).overflow for p in paths]
    assert np.mean(flags) >= 0.9


def test_gls_constant_integrand():
    g = grid(512)
    y = fn(g, np.sin(3 * g.points) + g.points**2)
    assert gls_integral(fn(g, np.ones(len(g))), y, 0.4) == pytest.approx(y.values[-1] - y.values[0], abs=1e-13)


@pytest.mark.parametrize("beta", [0.3, 0.4, 0.45])
def test_gls_smooth_pair(beta):
    g = grid(2**12)
    f = fn(g, g.points)
    assert gls_integral(f, f, beta) == pytest.approx(0.5, abs=1e-4)


def test_gls_beta_independence_smooth():
    g = grid(2**12)
    f = fn(g, np.cos(g.points))
    y = fn(g, np.exp(g.points))
    vals = [gls_integral(f, y, b) for b in (0.25, 0.35, 0.45)]
    assert max(vals) - min(vals) <= 1e-3


def test_gls_refinement_monotone():
    f = lambda g: fn(g, np.cos(2 * g.points))
    y = lambda g: fn(g, g.points**2)
    vals = [gls_integral(f(grid(n)), y(grid(n)), 0.35) for n in (256, 512, 1024, 2048)]
    gaps = np.abs(np.diff(vals))
    assert gaps[0] > gaps[1] > gaps[2]


def test_gls_zero_integrand():
    g = grid(256)
    z = fn(g, np.zeros(len(g)))
    y = fn(g, g.points)
    assert gls_integral(z, y, 0.4) == 0.0
    assert gls_bound(z, y, 0.4) == 0.0


def test_gls_bound_constant():
    g = grid(512)
    one = fn(g, np.ones(len(g)))
    assert gls_bound(one, fn(g, g.points), 0.5) >= 1.0


@settings(max_examples=15, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.26, 0.45))
def test_linearity(a, b, beta):
    g = grid(128)
    f1 = np.sin(5 * g.points)
    f2 = g.points**1.5
    y = fn(g, np.cos(g.points))
    lhs = gls_integral(fn(g, a * f1 + b * f2), y, beta)
    rhs = a * gls_integral(fn(g, f1), y, beta) + b * gls_integral(fn(g, f2), y, beta)
    assert lhs == pytest.approx(rhs, abs=1e-11)
    d = rl_derivative_left(fn(g, a * f1 + b * f2), beta).values
    d1 = rl_derivative_left(fn(g, f1), beta).values
    d2 = rl_derivative_left(fn(g, f2), beta).values
    np.testing.assert_allclose(d, a * d1 + b * d2, atol=1e-10)


def test_dominance_on_fbm_paths(fbm):
    g = grid(512)
    paths = sample_paths(fbm, g, 10, seed=21)
    f = fn(g, (g.points >= 0.4).astype(float) - 0.5 * (g.points >= 0.8))
    for p in paths:
        i = gls_integral(f, p, 0.35)
        b = gls_bound(f, p, 0.35)
        assert abs(i) <= b + 1e-6 * (1 + b)


def test_inadmissible_order_flagged():
    g = grid(1024)
    rough = fn(g, np.where(np.arange(len(g)) % 2 == 0, 0.0, 1.0))
    with pytest.raises(InadmissibleOrderError):
        gls_integral(fn(g, np.ones(len(g))), rough, 0.3, check=True)


@pytest.mark.parametrize("beta", [0.0, 1.0, -0.2])
def test_order_domain(beta):
    g = grid(16)
    with pytest.raises(ValueError):
        rl_derivative_left(fn(g, g.points), beta)


@pytest.mark.parametrize("alpha", [0.55, 0.75, 0.95])
def test_default_beta_inside_window(alpha):
    b = default_beta(alpha)
    assert 1 - alpha < b < 0.5
    assert default_beta(0.75) == pytest.approx(0.4875)
