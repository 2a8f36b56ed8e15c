import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaussrep import FBM, GenericKernel, GridFunction, TimeGrid, sample_paths
from gaussrep.frac_calc import gls_integral
from gaussrep.pathwise import (
    BVRule,
    Segment,
    StepIntegrand,
    f_eta,
    follmer_integral,
    integrate_step,
    ito_residual,
    running_integral,
    trajectory,
)


@pytest.fixture(scope="module")
def path(fbm, grid_1k):
    return sample_paths(fbm, grid_1k, 1, seed=7)[0]


def test_zero_and_constant(path, grid_1k):
    assert integrate_step(StepIntegrand.zero(grid_1k), path) == 0.0
    c = 2.5
    got = integrate_step(StepIntegrand.constant(grid_1k, c), path, 0.5)
    assert got == pytest.approx(c * (path(0.5) - path(0.0)), abs=1e-13)


def test_additivity(path, grid_1k):
    phi = StepIntegrand.build(grid_1k, [Segment(100, 900, "power_sign", eta=0.5, anchor=100)])
    run = running_integral(phi, path)
    left = integrate_step(phi, path, 0.25)
    right = integrate_step(phi, path, 1.0, s=0.25)
    assert left + right == pytest.approx(integrate_step(phi, path), abs=1e-14)
    assert integrate_step(phi, path) == run[-1]


def test_power_sign_matches_square(fbm):
    # f_1(x) = 2x integrates to x^2 by the Itô formula
    g = TimeGrid.uniform(1.0, 2**13)
    x = sample_paths(fbm, g, 1, seed=2)[0]
    phi = StepIntegrand(g, (Segment(0, g.n_cells, "power_sign", eta=1.0, anchor=0),))
    assert integrate_step(phi, x) == pytest.approx((x(1.0) - x(0.0)) ** 2, abs=5e-2)


def test_segments_must_tile(grid_1k):
    with pytest.raises(ValueError):
        StepIntegrand(grid_1k, (Segment(0, 10),))
    with pytest.raises(ValueError):
        StepIntegrand(grid_1k, (Segment(0, 600), Segment(500, 1024)))
    with pytest.raises(ValueError):
        Segment(10, 20, "power_sign", anchor=15)
    with pytest.raises(ValueError):
        Segment(10, 20, stop=25)
    with pytest.raises(ValueError):
        Segment(0, 1, "bogus")


def test_build_fills_gaps(grid_1k, path):
    phi = StepIntegrand.build(grid_1k, [Segment(10, 20, "constant", value=1.0)])
    assert len(phi.segments) == 3
    assert integrate_step(phi, path) == pytest.approx(path.values[20] - path.values[10], abs=1e-14)


def test_stop_zeroes_segment(grid_1k, path):
    seg = Segment(0, 100, "scaled_sign", anchor=0, multiplier=2.0, sign=-1.0, stop=40)
    v = StepIntegrand.build(grid_1k, [seg]).values(path)
    assert np.all(v[40:] == 0.0)
    np.testing.assert_array_equal(v[1:40], -2.0 * np.sign(path.values[1:40] - path.values[0]))


def test_trajectory_columns(grid_1k, path):
    phi = StepIntegrand.build(grid_1k, [Segment(10, 20, "constant", value=1.0, stop=15)])
    tr = trajectory(phi, path)
    assert tr.value.shape == tr.times.shape == tr.segment.shape == tr.active.shape
    assert tr.active[12] and not tr.active[16]


def test_different_grid_rejected(path):
    phi = StepIntegrand.zero(TimeGrid.uniform(1.0, 8))
    with pytest.raises(ValueError):
        integrate_step(phi, path)


@settings(max_examples=25, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(1, 1000))
def test_linearity_in_integrand(a, b, k):
    g = TimeGrid.uniform(1.0, 1024)
    x = sample_paths(FBM(0.75), g, 1, seed=1)[0]
    s1 = Segment(0, 1024, "power_sign", eta=0.3, anchor=0)
    s2 = Segment(0, 1024, "scaled_sign", anchor=0)
    v1 = integrate_step(StepIntegrand(g, (s1,)), x)
    v2 = integrate_step(StepIntegrand(g, (s2,)), x)
    comb = integrate_step(
        StepIntegrand(g, (Segment(0, 1024, "power_sign", eta=0.3, anchor=0, multiplier=a),)), x
    ) + integrate_step(StepIntegrand(g, (Segment(0, 1024, "scaled_sign", anchor=0, multiplier=b),)), x)
    assert comb == pytest.approx(a * v1 + b * v2, abs=1e-10)


def test_follmer_constant_telescopes(path):
    one = GridFunction(path.grid, np.ones(len(path.grid)))
    r = follmer_integral(one, path, levels=4)
    assert all(s == pytest.approx(path.values[-1] - path.values[0], abs=1e-13) for s in r.partial_sums)
    assert r.converged


def test_follmer_smooth_limit():
    g = TimeGrid.uniform(1.0, 4096)
    s = GridFunction(g, g.points)
    r = follmer_integral(s, s, levels=5, tol=1e-3)
    assert abs(r.value - 0.5) <= g.step
    assert r.converged
    errs = [abs(v - 0.5) for v in r.partial_sums]
    assert all(a > b for a, b in zip(errs, errs[1:]))


def test_follmer_depth_error(path):
    with pytest.raises(ValueError):
        follmer_integral(path, path, levels=12)


@pytest.mark.parametrize(
    "f",
    [lambda x: np.clip(x, -0.5, 0.5), np.sign, lambda x: (x > 0.1).astype(float)],
    ids=["clip", "sign", "indicator"],
)
def test_follmer_agrees_with_gls(fbm, f):
    g = TimeGrid.uniform(1.0, 2**11)
    paths = sample_paths(fbm, g, 100, seed=8)
    ok = 0
    for x in paths:
        y = GridFunction(g, f(x.values))
        fr = follmer_integral(y, x, levels=3)
        fine = gls_integral(y, x, 0.35)
        coarse = gls_integral(y.coarsen(2), x.coarsen(2), 0.35)
        ok += abs(fr.value - fine) <= 2 * (fr.gap + abs(fine - coarse))
    assert ok >= 95


@pytest.mark.parametrize(
    "rule, x, f, F",
    [
        (BVRule("constant", c=2.0), 0.3, 2.0, 0.6),
        (BVRule("sign"), -0.3, -1.0, 0.3),
        (BVRule("indicator", K=0.1), 0.3, 1.0, 0.2),
        (BVRule("indicator", K=-0.1), -0.3, 0.0, -0.1),
        (BVRule("power_sign", eta=1.0), -0.5, -1.0, 0.25),
    ],
)
def test_rules(rule, x, f, F):
    assert rule.f(x) == pytest.approx(f)
    assert rule.F(x) == pytest.approx(F)
    assert rule.F(0.0) == pytest.approx(0.0)


def test_unknown_rule():
    with pytest.raises(ValueError):
        BVRule("cosine")


def test_f_eta_is_odd():
    x = np.linspace(-2, 2, 41)
    np.testing.assert_allclose(f_eta(-x, 0.3), -f_eta(x, 0.3))


def test_ito_residual_constant_exact(fbm, path):
    assert ito_residual(fbm, BVRule("constant"), 0.0, path) == pytest.approx(0.0, abs=1e-13)


def test_ito_residual_window(fbm, path):
    with pytest.raises(ValueError):
        ito_residual(fbm, BVRule("sign"), 1.0, path)
    generic = GenericKernel(lambda t, s: np.minimum(t, s) ** 1.5, 0.75, "g")
    with pytest.raises(ValueError):
        ito_residual(generic, BVRule("sign"), 0.25, path)
    ito_residual(generic, BVRule("sign"), 0.5, path)


@pytest.mark.parametrize("rule", [BVRule("indicator"), BVRule("sign"), BVRule("power_sign", eta=1 / 14)], ids=lambda r: r.name)
def test_ito_residual_decays(fbm, rule):
    g = TimeGrid.uniform(1.0, 2**13)
    paths = sample_paths(fbm, g, 100, seed=31)
    meds = []
    for f in (8, 4, 2, 1):
        c = g.coarsen(f)
        meds.append(np.median([abs(ito_residual(fbm, rule, 0.0, GridFunction(c, p.values[::f]))) for p in paths]))
    assert all(a >= b for a, b in zip(meds, meds[1:]))
    assert meds[-1] <= 5e-2
