import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaussrep import (
    FBM,
    GenericKernel,
    StationaryExp,
    StationaryGeneric,
    TimeGrid,
    check_class_membership,
    check_smallball_conditions,
    covariance,
    incremental_variance,
    sample_paths,
)
from gaussrep.gp_sim import (
    FactorizationError,
    cholesky_factor,
    circulant_spectrum,
    covariance_matrix,
)


@pytest.mark.parametrize(
    "model, t, s, expected",
    [
        (StationaryExp(0.75), 1.0, 1.0, 1.0),
        (FBM(0.75), 1.0, 1.0, 1.0),
        (FBM(0.75), 2.0, 1.0, math.sqrt(2.0)),
    ],
)
def test_covariance_values(model, t, s, expected):
    assert covariance(model, t, s) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize(
    "model, t, s, expected",
    [
        (FBM(0.75), 1.0, 0.5, 0.5**1.5),
        (StationaryExp(0.75), 0.6, 0.5, 2 * (1 - math.exp(-(0.1**1.5)))),
    ],
)
def test_incremental_variance_values(model, t, s, expected):
    got = incremental_variance(model, t, s)
    assert got == pytest.approx(expected, rel=1e-12)
    alt = model.var(t) + model.var(s) - 2 * model.cov(t, s)
    assert got == pytest.approx(alt, rel=1e-9)


@pytest.mark.parametrize("model", [FBM(0.75), StationaryExp(0.75), FBM(0.3)])
def test_incremental_variance_diagonal_is_zero(model):
    assert incremental_variance(model, 0.37, 0.37) == 0.0


def test_domain_check():
    with pytest.raises(ValueError):
        covariance(FBM(0.75), 1.5, 0.2, T=1.0)
    with pytest.raises(ValueError):
        covariance(FBM(0.75), -0.1, 0.2)


@pytest.mark.parametrize("H", [0.0, 1.0, -0.2])
def test_bad_hurst(H):
    with pytest.raises(ValueError):
        FBM(H)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.55, 0.95))
def test_covariance_symmetry(t, s, H):
    for m in (FBM(H), StationaryExp(H)):
        assert covariance(m, t, s) == covariance(m, s, t)


@pytest.mark.parametrize("model", [FBM(0.75), FBM(0.3), StationaryExp(0.75), StationaryExp(0.6)])
def test_covariance_matrix_psd(model):
    pts = TimeGrid.uniform(1.0, 2**9).points
    lam = np.linalg.eigvalsh(covariance_matrix(model, pts))
    assert lam.min() >= -1e-8 * lam.max()


def test_sampling_mean_and_variance(fbm):
    g = TimeGrid.uniform(1.0, 256)
    b = sample_paths(fbm, g, 5000, seed=11)
    sd = np.sqrt(np.array([fbm.var(t) for t in g.points]) / 5000)
    assert np.all(np.abs(b.values.mean(axis=0)) <= 4 * sd + 1e-15)
    assert abs(b.values[:, -1].var() - 1.0) <= 4 * math.sqrt(2 / 5000)


@pytest.mark.parametrize("model", [FBM(0.75), StationaryExp(0.75), FBM(0.3)])
@pytest.mark.parametrize("method", ["cholesky", "circulant"])
def test_empirical_covariance_within_5se(model, method):
    g = TimeGrid.uniform(1.0, 7)
    n = 10_000
    b = sample_paths(model, g, n, seed=5, method=method)
    emp = b.values.T @ b.values / n
    exact = covariance_matrix(model, g.points)
    se = np.sqrt((exact**2 + np.outer(np.diag(exact), np.diag(exact))) / n)
    assert np.all(np.abs(emp - exact) <= 5 * se + 1e-12)


def test_determinism_and_subsets(fbm, grid_1k):
    a = sample_paths(fbm, grid_1k, 6, seed=99)
    b = sample_paths(fbm, grid_1k, 6, seed=99)
    np.testing.assert_array_equal(a.values, b.values)
    sub = sample_paths(fbm, grid_1k, 0, seed=99, indices=[4])
    np.testing.assert_array_equal(sub.values[0], a.values[4])
    assert a[2].index == 2 and a[2].seed == 99


def test_count_zero_rejected(fbm, grid_1k):
    with pytest.raises(ValueError):
        sample_paths(fbm, grid_1k, 0, seed=1)


def test_circulant_and_cholesky_agree_in_distribution(fbm):
    g = TimeGrid.uniform(1.0, 64)
    assert circulant_spectrum(fbm, g) is not None
    a = sample_paths(fbm, g, 4000, seed=1, method="circulant").values[:, -1]
    b = sample_paths(fbm, g, 4000, seed=2, method="cholesky").values[:, -1]
    assert abs(a.var() - b.var()) < 5 * math.sqrt(4 / 4000)


def test_factorization_error_reports_eigenvalue():
    # unit variances but correlation 2: not positive semi-definite
    bad = GenericKernel(lambda t, s: np.where(np.asarray(t) == np.asarray(s), 1.0, 2.0), 0.75, "bad")
    with pytest.raises(FactorizationError) as info:
        cholesky_factor(bad, np.array([0.5, 1.0]))
    assert info.value.min_eigenvalue < 0


@pytest.mark.parametrize("H", [0.6, 0.75, 0.9])
def test_holder_realisation_slope(H):
    model = FBM(H)
    g = TimeGrid.uniform(1.0, 2**12)
    x = sample_paths(model, g, 1, seed=3).values[0]
    lags = 2 ** np.arange(0, 9)
    osc = [np.max(np.abs(x[l:] - x[:-l])) for l in lags]
    slope = np.polyfit(np.log(lags * g.step), np.log(osc), 1)[0]
    assert slope >= H - 0.1


def test_stationary_generic_from_table():
    lags = np.linspace(0, 2, 201)
    m = StationaryGeneric.from_table(lags, np.exp(-(lags**1.5)))
    assert m.cov(0.3, 0.3) == pytest.approx(1.0)
    assert m.cov(0.5, 0.6) == pytest.approx(math.exp(-(0.1**1.5)), abs=1e-3)
    with pytest.raises(ValueError):
        StationaryGeneric.from_table([0.1, 1.0], [1.0, 0.5])


class TestClassMembership:
    grid = TimeGrid.uniform(1.0, 1024)

    def test_fbm_passes(self):
        rep = check_class_membership(FBM(0.75), 0.75, 0.5, self.grid)
        assert rep.passed
        assert rep.C > 0 and rep.c > 0

    def test_brownian_fails_holder_condition(self):
        rep = check_class_membership(FBM(0.5), 0.75, 0.5, self.grid)
        assert not rep.holder_bound
        assert rep.holder_exponent == pytest.approx(0.5, abs=0.02)
        assert rep.positive_covariance and rep.quadratic_lower_bound

    def test_stationary_exp_passes(self):
        assert check_class_membership(StationaryExp(0.75), 0.75, 0.5, self.grid).passed

    def test_bad_delta(self):
        with pytest.raises(ValueError):
            check_class_membership(FBM(0.75), 0.75, 1.5, self.grid)

    def test_grid_too_coarse(self):
        with pytest.raises(ValueError):
            check_class_membership(FBM(0.75), 0.75, 0.5, TimeGrid.uniform(1.0, 8))


class TestSmallBallConditions:
    grid = TimeGrid.uniform(1.0, 200)

    def test_power_passes(self):
        assert check_smallball_conditions(lambda x: x**1.5, self.grid).passed

    def test_linear_is_equality(self):
        rep = check_smallball_conditions(lambda x: x, self.grid)
        assert rep.passed
        assert abs(rep.min_margin) < 1e-12

    def test_square_root_fails(self):
        rep = check_smallball_conditions(np.sqrt, self.grid)
        assert not rep.lattice_ok

    @pytest.mark.parametrize("model", [FBM(0.75), StationaryExp(0.75)])
    def test_models(self, model):
        assert check_smallball_conditions(model, self.grid).passed

    def test_generic_refused(self):
        m = GenericKernel(lambda t, s: np.minimum(t, s), 0.5, "bm")
        with pytest.raises(ValueError):
            check_smallball_conditions(m, self.grid)
