import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from perflab.neural import TrainConfig
from perflab.predictors import (DiscretizedPredictor, LinearPredictor, PolynomialPredictor, ShuffleSpec,
                                example1_predictor, fit_linear_predictor, fit_neural_predictor,
                                fit_overparam_predictor, interpolate, make_test_predictor, poly_features,
                                predictor_from_dict, quantile_levels, wrap_discretize, wrap_noise)
from perflab.scm import NoiseSpec


def test_linear_interpolates_exact_labels():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((50, 4))
    beta = np.array([1.0, -2.0, 0.5, 3.0])
    f = fit_linear_predictor(X, X @ beta)
    np.testing.assert_allclose(f.weights, beta, atol=1e-8)
    assert abs(f.intercept) < 1e-8


def test_linear_constant_labels():
    X = np.random.default_rng(1).standard_normal((30, 2))
    f = fit_linear_predictor(X, np.full(30, 4.5))
    np.testing.assert_allclose(f.weights, 0.0, atol=1e-10)
    assert f.intercept == pytest.approx(4.5)


def test_linear_noisy_within_standard_errors():
    rng = np.random.default_rng(2)
    n, beta = 100_000, np.array([1.0, 0.5, -1.0, 2.0, 0.0])
    X = rng.standard_normal((n, 5))
    y = X @ beta + rng.standard_normal(n)
    f = fit_linear_predictor(X, y)
    A = np.column_stack([np.ones(n), X])
    resid = y - f.predict(X) 
    cov = resid.var() * np.linalg.inv(A.T @ A)
    se = np.sqrt(np.diag(cov))[1:]
    assert np.all(np.abs(f.weights - beta) < 3 * se)


def test_linear_underdetermined_needs_opt_in():
    X = np.ones((2, 3))
    with pytest.raises(ValueError):
        fit_linear_predictor(X, np.ones(2))
    f = fit_linear_predictor(X, np.ones(2), allow_min_norm=True)
    assert f.diagnostics["rank_deficient"]


def test_shuffle_fraction_zero_is_identity():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((100, 2))
    y = X @ [1.0, 2.0] + rng.standard_normal(100)
    a = make_test_predictor(X, y, ShuffleSpec(seed=5, fraction=0.0))
    b = fit_linear_predictor(X, y)
    np.testing.assert_array_equal(a.weights, b.weights)


def test_full_shuffle_kills_signal():
    rng = np.random.default_rng(4)
    n = 100_000
    X = rng.standard_normal((n, 3))
    y = X @ [1.0, -1.0, 2.0] + rng.standard_normal(n)
    f = make_test_predictor(X, y, ShuffleSpec(seed=6))
    se = y.std() / np.sqrt(n)
    assert np.all(np.abs(f.weights) < 3 * se)


def test_flip_half_gives_chance_accuracy():
    rng = np.random.default_rng(5)
    n = 20_000
    X = rng.standard_normal((n, 2))
    y = (X[:, 0] > 0).astype(float)
    f = make_test_predictor(X[: n // 2], y[: n // 2], ShuffleSpec(seed=7, fraction=0.0, flip_gamma=0.5))
    # held-out labels come from the same flipped distribution, so they carry no signal about x
    held = ShuffleSpec(seed=8, fraction=0.0, flip_gamma=0.5).apply(y[n // 2:])
    acc = np.mean((f.predict(X[n // 2:]) >= 0.5) == held)
    assert abs(acc - 0.5) < 0.02


def test_interpolate_endpoints_and_midpoint():
    a = LinearPredictor([2.0, 0.0], 1.0)
    b = LinearPredictor([0.0, 2.0], -1.0)
    np.testing.assert_array_equal(interpolate(a, b, 1.0).weights, a.weights)
    np.testing.assert_array_equal(interpolate(a, b, 0.0).weights, b.weights)
    np.testing.assert_array_equal(interpolate(a, b, 0.5).weights, [1.0, 1.0])
    with pytest.raises(ValueError):
        interpolate(a, b, 1.5)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 1), st.integers(0, 1000))
def test_interpolate_is_affine(rho, seed):
    rng = np.random.default_rng(seed)
    a = LinearPredictor(rng.standard_normal(3), rng.standard_normal())
    b = LinearPredictor(rng.standard_normal(3), rng.standard_normal())
    X = rng.standard_normal((10, 3))
    np.testing.assert_allclose(interpolate(a, b, rho)(X), rho * a(X) + (1 - rho) * b(X), atol=1e-12)


def test_zero_noise_is_identity():
    f = LinearPredictor([1.0, -1.0])
    g = wrap_noise(f, NoiseSpec("gaussian", 0.0, "prediction"))
    X = np.random.default_rng(0).standard_normal((20, 2))
    np.testing.assert_array_equal(g.predict(X, np.random.default_rng(1)), f.predict(X))


def test_laplace_noise_distribution():
    f = LinearPredictor([1.0])
    g = wrap_noise(f, NoiseSpec("laplace", 1.0, "prediction"))
    X = np.random.default_rng(0).standard_normal((1_000_000, 1))
    resid = g.predict(X, np.random.default_rng(1)) - f.predict(X)
    assert stats.kstest(resid, "laplace").statistic < 0.002


def test_noisy_predictor_needs_rng():
    g = wrap_noise(LinearPredictor([1.0]), NoiseSpec("gaussian", 1.0, "prediction"))
    with pytest.raises(ValueError):
        g.predict(np.zeros((2, 1)))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["gaussian", "laplace", "uniform"]))
def test_deterministic_view_is_seed_independent(seed, family):
    f = LinearPredictor([0.5, 2.0], 1.0)
    g = wrap_noise(f, NoiseSpec(family, 0.7, "prediction"))
    X = np.random.default_rng(seed).standard_normal((8, 2))
    np.testing.assert_array_equal(g.deterministic_view().predict(X), f.predict(X))


def test_discretize_rules():
    d = DiscretizedPredictor(LinearPredictor([1.0]), [0.0, 1.0])
    assert d.predict(np.array([[0.4]]))[0] == 0.0
    assert d.predict(np.array([[0.5]]))[0] == 0.0
    assert d.predict(np.array([[0.6]]))[0] == 1.0


def test_four_levels_cover_range():
    base = LinearPredictor([1.0, 1.0])
    X = np.random.default_rng(0).standard_normal((10_000, 2))
    vals = base.predict(X)
    d = wrap_discretize(base, np.linspace(vals.min(), vals.max(), 4))
    assert np.unique(d.predict(X)).size == 4
    q = wrap_discretize(base, quantile_levels(base, X, 4))
    assert np.unique(q.predict(X)).size == 4

@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=5, unique=True), st.integers(0, 1000))
def test_discretize_output_in_level_set(levels, seed):
    d = wrap_discretize(LinearPredictor([3.0]), levels)
    out = d.predict(np.random.default_rng(seed).standard_normal((50, 1)))
    assert set(out.tolist()) <= set(float(v) for v in levels)


def test_poly_features_and_quadratic_recovery():
    np.testing.assert_array_equal(poly_features(np.array([[1.0, 2.0]]), 2), [[1.0, 2.0, 1.0, 2.0, 4.0]])
    x = np.linspace(-2, 2, 9)[:, None]
    f = fit_overparam_predictor(x, x[:, 0] ** 2)
    np.testing.assert_allclose(f.weights, [0.0, 1.0], atol=1e-8)


def test_example1_value():
    assert example1_predictor(1.0, 2.0).predict(np.array([[0.5]]))[0] == pytest.approx(1.25)


def test_quadratic_terms_vanish_for_linear_labels():
    rng = np.random.default_rng(8)
    n = 100_000
    X = rng.standard_normal((n, 2))
    y = X @ [1.0, -1.0] + rng.standard_normal(n)
    f = fit_overparam_predictor(X, y)
    # quadratic monomials of standard normals have variance 1 (cross) or 2 (squares)
    se = np.array([1 / np.sqrt(2), 1.0, 1 / np.sqrt(2)]) / np.sqrt(n)
    assert np.all(np.abs(f.weights[2:]) < 3 * se)


def test_feature_cap():
    with pytest.raises(ValueError):
        fit_overparam_predictor(np.zeros((5, 200)), np.zeros(5), degree=2, max_features=100)


def test_one_unit_net_matches_ols_on_linear_target():
    rng = np.random.default_rng(9)
    X = rng.standard_normal((4000, 3))
    y = X @ [0.3, -0.2, 0.1] + 0.5 * rng.standard_normal(4000)
    net = fit_neural_predictor(X[:3000], y[:3000], 1, TrainConfig(optimizer="lbfgs", maxiter=300))
    ols = fit_linear_predictor(X[:3000], y[:3000])
    r_net = np.sqrt(np.mean((net.predict(X[3000:]) - y[3000:]) ** 2))
    r_ols = np.sqrt(np.mean((ols.predict(X[3000:]) - y[3000:]) ** 2))
    assert r_net <= 1.1 * r_ols


def test_net_on_constant_labels():
    X = np.random.default_rng(10).standard_normal((500, 2))
    net = fit_neural_predictor(X, np.full(500, 7.0), 3, TrainConfig(optimizer="adam", epochs=20))
    assert np.ptp(net.predict(X)) < 1e-3
    assert net.predict(X)[0] == pytest.approx(7.0, abs=1e-3)


def test_wide_student_fits_three_unit_teacher():
    rng = np.random.default_rng(11)
    n = 100_000
    W = rng.standard_normal((3, 4))
    teacher = lambda Z: np.tanh(Z @ W.T) @ np.array([1.5, -1.0, 2.0])  # noqa: E731
    X = rng.standard_normal((n, 4))
    y = teacher(X) + 0.1 * rng.standard_normal(n)
    net = fit_neural_predictor(X, y, 16, TrainConfig(optimizer="lbfgs", maxiter=300))
    Xt = rng.standard_normal((20_000, 4))
    yt = teacher(Xt) + 0.1 * rng.standard_normal(20_000)
    assert np.sqrt(np.mean((net.predict(Xt) - yt) ** 2)) <= 1.1 * 0.1 + 0.02


def test_serialization_roundtrip():
    X = np.random.default_rng(12).standard_normal((5, 2))
    for f in [LinearPredictor([1.0, 2.0], 0.5), PolynomialPredictor(2, [1, 2, 3, 4, 5], 0.1, 2),
              wrap_noise(LinearPredictor([1.0, 0.0]), NoiseSpec("gaussian", 1.0, "prediction")),
              wrap_discretize(LinearPredictor([1.0, 1.0]), [-1.0, 0.0, 1.0])]:
        back = predictor_from_dict(f.to_dict())
        np.testing.assert_array_equal(back.deterministic_view().predict(X), f.deterministic_view().predict(X))
