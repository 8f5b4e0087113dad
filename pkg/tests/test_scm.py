import json

import numpy as np
import pytest

from perflab.predictors import DiscretizedPredictor, LinearPredictor, wrap_noise
from perflab.rng import SeedPlan
from perflab.scm import (CovariateSource, Dataset, NoiseSpec, OutcomeMechanism, counterfactual_metric,
                         gaussian_noise, generate_dataset, ground_truth_m_y, jackknife_mean_se,
                         prediction_distance_sq, prop1_bounds)

BETA = np.array([1.0, 1.0])


def linear_g1(beta=BETA, intercept=0.0):
    return LinearPredictor(np.asarray(beta, dtype=float), intercept, id="g1")


def test_alpha_zero_gives_base_function():
    src = CovariateSource.gaussian(2)
    f = LinearPredictor([3.0, -1.0], 0.5)
    data = generate_dataset(src, f, OutcomeMechanism(linear_g1(), "linear", 0.0), 50, SeedPlan(1))
    np.testing.assert_array_equal(data.outcomes, data.covariates @ BETA)


def test_linear_composition():
    src = CovariateSource.gaussian(2)
    theta = np.array([1.0, 0.0])
    data = generate_dataset(src, LinearPredictor(theta), OutcomeMechanism(linear_g1(), "linear", 0.5), 50,
                            SeedPlan(2))
    np.testing.assert_allclose(data.outcomes, data.covariates @ (BETA + 0.5 * theta), atol=1e-12)


def test_outcome_moments():
    src = CovariateSource.gaussian(2)
    theta = np.array([1.0, 0.0])
    mech = OutcomeMechanism(linear_g1(), "linear", 0.5, gaussian_noise(1.0))
    data = generate_dataset(src, LinearPredictor(theta), mech, 1_000_000, SeedPlan(3))
    assert abs(data.outcomes.mean()) < 0.005
    target = np.sum((BETA + 0.5 * theta) ** 2) + 1.0
    assert abs(data.outcomes.var() / target - 1) < 0.02


def test_ground_truth_values():
    mech = OutcomeMechanism(linear_g1(), "linear", 0.5)
    assert ground_truth_m_y(mech, np.zeros(2), 2.0) == pytest.approx(1.0)
    flat = OutcomeMechanism(linear_g1(), "linear", 0.0)
    x = np.array([[0.3, -1.2]])
    assert ground_truth_m_y(flat, x, 5.0) == ground_truth_m_y(flat, x, -7.0)


def test_replace_mechanism_expectation_matches_sampling():
    three = lambda X: np.full(len(X), 3.0)  # noqa: E731
    mech = OutcomeMechanism(three, "replace", 0.5)
    assert ground_truth_m_y(mech, np.zeros((1, 1)), 1.0) == pytest.approx(2.0)
    draws = mech.sample(np.zeros((200_000, 1)), np.ones(200_000), np.random.default_rng(0))
    assert abs(draws.mean() - 2.0) < 0.01


def test_seed_determinism_is_bytewise(tmp_path):
    src = CovariateSource.gaussian(3)
    f = wrap_noise(LinearPredictor([1.0, 2.0, 3.0]), NoiseSpec("laplace", 0.5, "prediction"))
    mech = OutcomeMechanism(linear_g1([1.0, 0.0, -1.0]), "linear", 0.3, gaussian_noise(1.0))
    a = generate_dataset(src, f, mech, 200, SeedPlan(9))
    b = generate_dataset(src, f, mech, 200, SeedPlan(9))
    a.to_csv(tmp_path / "a.csv")
    b.to_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_mediation_sufficiency():
    # two different functions that agree on the sample produce identical outcomes
    X = np.array([[0.0, 1.0], [1.0, 0.0], [2.0, 2.0]])
    src = CovariateSource.table(X)
    f1 = LinearPredictor([1.0, 1.0])
    f2 = DiscretizedPredictor(LinearPredictor([1.0, 1.0]), [1.0, 4.0])
    mech = OutcomeMechanism(linear_g1(), "linear", 0.7, gaussian_noise(1.0))
    a = generate_dataset(src, f1, mech, 3, SeedPlan(4), X=X)
    b = generate_dataset(src, f2, mech, 3, SeedPlan(4), X=X)
    np.testing.assert_array_equal(a.predictions, b.predictions)
    np.testing.assert_array_equal(a.outcomes, b.outcomes)


def test_discrete_cell_mixture_mean():
    # one covariate cell, predictions alternate between two levels with frequencies (q, 1 - q)
    n = 200_000
    X = np.zeros((n, 1))
    rng = np.random.default_rng(5)
    yhat = np.where(rng.random(n) < 0.3, -1.0, 2.0)
    mech = OutcomeMechanism(lambda Z: np.full(len(Z), 4.0), "linear", 0.5, gaussian_noise(1.0))
    y = mech.sample(X, yhat, rng)
    q = np.mean(yhat == -1.0)
    expected = q * (4.0 - 0.5) + (1 - q) * (4.0 + 1.0)
    assert abs(y.mean() - expected) < 4 / np.sqrt(n)


def test_dimension_mismatch_raises():
    with pytest.raises(ValueError):
        generate_dataset(CovariateSource.gaussian(3), LinearPredictor([1.0, 2.0]),
                         OutcomeMechanism(linear_g1(), "linear", 0.5), 10, SeedPlan(0))


def test_nonfinite_prediction_reports_row():
    class Bad:
        id = "bad"
        input_dim = 1

        def predict(self, X, rng=None):
            out = np.zeros(len(X))
            out[3] = np.inf
            return out

    mech = OutcomeMechanism(lambda X: X[:, 0], "linear", 0.5)
    with pytest.raises(FloatingPointError, match="row 3"):
        generate_dataset(CovariateSource.gaussian(1), Bad(), mech, 10, SeedPlan(0))


def test_csv_roundtrip_and_sidecar(tmp_path):
    data = Dataset(np.array([[0.1, 0.2]]), np.array([1.0 / 3]), np.array([2.0]), {"k": 1}, {"G": np.array([0.5])})
    path = tmp_path / "d.csv"
    data.to_csv(path)
    back = Dataset.from_csv(path)
    assert path.read_text().splitlines()[0] == "x0,x1,yhat,y,G"
    np.testing.assert_array_equal(back.predictions, data.predictions)
    np.testing.assert_array_equal(back.extra["G"], [0.5])
    assert json.loads((tmp_path / "d.csv.json").read_text()) == {"k": 1}


def test_prediction_distance():
    src = CovariateSource.gaussian(3)
    f = LinearPredictor([1.0, 2.0, 0.0])
    assert prediction_distance_sq(f, f, src, 1000, 0) == (0.0, 0.0)
    zero = LinearPredictor([0.0, 0.0, 0.0], 0.0)
    one = LinearPredictor([0.0, 0.0, 0.0], 1.0)
    assert prediction_distance_sq(zero, one, src, 1000, 0)[0] == pytest.approx(1.0)
    phi = LinearPredictor([0.0, 1.0, -1.0])
    mean, se = prediction_distance_sq(f, phi, src, 200_000, 1)
    assert abs(mean - 3.0) < 3 * se


def test_prop1_bounds():
    assert prop1_bounds(0.0, 3.0) == (0.0, 0.0)
    assert prop1_bounds(2.0, 0.0) == (0.0, 0.0)
    assert prop1_bounds(0.5, 4.0) == (1.0, 1.0)
    lo, hi = prop1_bounds(0.5, 4.0, mu=1.0, gamma=3.0)
    assert lo < hi


def test_jackknife_se_of_mean():
    v = np.array([1.0, 2.0, 3.0, 4.0])
    assert jackknife_mean_se(v) == pytest.approx(v.std(ddof=1) / 2)


def test_counterfactual_metric():
    src = CovariateSource.gaussian(2)
    mech = OutcomeMechanism(linear_g1(), "linear", 0.5, gaussian_noise(1.0))
    f = LinearPredictor([0.0, 0.0], 2.0)
    one, se = counterfactual_metric(mech, lambda x, y, yh: np.ones(len(y)), src, f, 1000, 0)
    assert one == 1.0 and se == 0.0
    mean, se = counterfactual_metric(mech, lambda x, y, yh: y, src, f, 100_000, 1)
    assert abs(mean - 1.0) < 3 * se
    exact = OutcomeMechanism(lambda X: np.zeros(len(X)), "linear", 1.0)
    loss, _ = counterfactual_metric(exact, lambda x, y, yh: (y - yh) ** 2, src, LinearPredictor([1.0, 1.0]), 500, 2)
    assert loss == 0.0
