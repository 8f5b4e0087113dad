"""Deployed predictors: the training-time model and the test-time model.

Every predictor exposes ``predict(X, rng=None)`` and a ``deterministic_view``
that strips prediction noise.  Wrappers (noise, discretization) compose over
a base predictor.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .linalg import ols_minimum_norm, with_intercept
from .neural import TanhNet, TrainConfig, fit_tanh_net
from .rng import as_generator
from .scm import NoiseSpec

MAX_POLY_FEATURES = 5000


class Predictor:
    id: str = "predictor"
    kind: str = "abstract"
    input_dim: Optional[int] = None

    def predict(self, X, rng=None) -> np.ndarray:
        raise NotImplementedError

    def deterministic_view(self) -> "Predictor":
        return self

    @property
    def is_deterministic(self) -> bool:
        return True

    def __call__(self, X) -> np.ndarray:
        return self.deterministic_view().predict(np.atleast_2d(X))

    def to_dict(self) -> dict:
        raise NotImplementedError

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


class LinearPredictor(Predictor):
    kind = "linear"

    def __init__(self, weights, intercept: float = 0.0, id: str = "linear", diagnostics=None):
        self.weights = np.asarray(weights, dtype=float).ravel()
        self.intercept = float(intercept)
        self.id = id
        self.input_dim = self.weights.shape[0]
        self.diagnostics = diagnostics or {}

    def predict(self, X, rng=None) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.weights + self.intercept

    def to_dict(self) -> dict:
        return {"id": self.id, "kind": "linear", "weights": self.weights.tolist(),
                "intercept": self.intercept}


def poly_features(X, degree: int) -> np.ndarray:
    """All monomials of total degree 1..degree (squares and cross terms, no bias)."""
    X = np.asarray(X, dtype=float)
    cols = []
    for k in range(1, degree + 1):
        for combo in itertools.combinations_with_replacement(range(X.shape[1]), k):
            cols.append(np.prod(X[:, combo], axis=1))
    return np.column_stack(cols)


def poly_feature_count(dim: int, degree: int) -> int:
    from math import comb
    return sum(comb(dim + k - 1, k) for k in range(1, degree + 1))


class PolynomialPredictor(Predictor):
    kind = "polynomial"

    def __init__(self, degree: int, weights, intercept: float, input_dim: int,
                 id: str = "poly", diagnostics=None):
        if degree < 1:
            raise ValueError("degree must be >= 1")
        self.degree = int(degree)
        self.weights = np.asarray(weights, dtype=float).ravel()
        self.intercept = float(intercept)
        self.input_dim = int(input_dim)
        self.id = id
        self.diagnostics = diagnostics or {}
        if self.weights.shape[0] != poly_feature_count(self.input_dim, self.degree):
            raise ValueError("weight vector does not match the polynomial feature count")

    def predict(self, X, rng=None) -> np.ndarray:
        return poly_features(X, self.degree) @ self.weights + self.intercept

    def to_dict(self) -> dict:
        return {"id": self.id, "kind": "polynomial", "degree": self.degree,
                "weights": self.weights.tolist(), "intercept": self.intercept,
                "input_dim": self.input_dim}


class NeuralPredictor(Predictor):
    kind = "neural"

    def __init__(self, net: TanhNet, id: str = "neural", diagnostics=None):
        self.net = net
        self.id = id
        self.input_dim = net.hidden_dim
        self.diagnostics = diagnostics or {}

    @property
    def units(self) -> int:
        return self.net.units

    def predict(self, X, rng=None) -> np.ndarray:
        return self.net(X)

    def to_dict(self) -> dict:
        return {"id": self.id, "kind": "neural", "net": self.net.to_dict()}


class ModelPredictor(Predictor):
    """Adapter turning a fitted covariate-only model into a predictor.

    With ``threshold`` set the output is binarized to {0, 1}.
    """

    kind = "model"

    def __init__(self, model, threshold: Optional[float] = None, id: str = "model"):
        self.model = model
        self.threshold = threshold
        self.id = id
        self.input_dim = getattr(model, "input_dim", None)

    def predict(self, X, rng=None) -> np.ndarray:
        out = np.asarray(self.model.predict(X), dtype=float)
        if self.threshold is not None:
            out = (out >= self.threshold).astype(float)
        return out

    def to_dict(self) -> dict:
        return {"id": self.id, "kind": "model", "threshold": self.threshold,
                "model": self.model.to_dict()}


class NoisyPredictor(Predictor):
    kind = "composed"

    def __init__(self, base: Predictor, noise: NoiseSpec, id: Optional[str] = None):
        if noise.applies_to != "prediction":
            raise ValueError("prediction noise must have applies_to='prediction'")
        self.base = base
        self.noise = noise
        self.id = id or f"{base.id}+{noise.family}({noise.scale:g})"
        self.input_dim = base.input_dim

    @property
    def is_deterministic(self) -> bool:
        return self.noise.is_zero and self.base.is_deterministic

    def predict(self, X, rng=None) -> np.ndarray:
        out = self.base.predict(X, rng)
        if self.noise.is_zero:
            return out
        if rng is None:
            raise ValueError("a random generator is needed to draw prediction noise")
        return out + self.noise.sample(out.shape[0], rng)

    def deterministic_view(self) -> Predictor:
        return self.base.deterministic_view()

    def to_dict(self) -> dict:
        return {"id": self.id, "kind": "composed", "base": self.base.to_dict(),
                "wrapper": {"noise": self.noise.to_dict()}}


class DiscretizedPredictor(Predictor):
    kind = "composed"

    def __init__(self, base: Predictor, levels: Sequence[float], id: Optional[str] = None):
        levels = np.unique(np.asarray(levels, dtype=float))
        if levels.size < 2:
            raise ValueError("discretization needs at least two distinct levels")
        self.base = base
        self.levels = levels
        self.id = id or f"{base.id}+discrete({levels.size})"
        self.input_dim = base.input_dim

    @property
    def is_deterministic(self) -> bool:
        return self.base.is_deterministic

    def snap(self, values) -> np.ndarray:
        """Nearest level; exact midpoints go to the lower level."""
        v = np.asarray(values, dtype=float)
        lv = self.levels
        hi = np.clip(np.searchsorted(lv, v, side="left"), 1, lv.size - 1)
        lo = hi - 1
        take_lo = (v - lv[lo]) <= (lv[hi] - v)
        return np.where(take_lo, lv[lo], lv[hi])

    def predict(self, X, rng=None) -> np.ndarray:
        return self.snap(self.base.predict(X, rng))

    def deterministic_view(self) -> Predictor:
        base = self.base.deterministic_view()
        return self if base is self.base else DiscretizedPredictor(base, self.levels, self.id)

    def to_dict(self) -> dict:
        return {"id": self.id, "kind": "composed", "base": self.base.to_dict(),
                "wrapper": {"discretize": self.levels.tolist()}}


# ----------------------------------------------------------------------------
# fitting
# ----------------------------------------------------------------------------


def _check_xy(X, labels):
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if X.ndim != 2 or labels.shape != (X.shape[0],):
        raise ValueError("covariates must be n x d and labels length n")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(labels))):
        raise ValueError("covariates and labels must be finite")
    return X, labels


def fit_linear_predictor(X, labels, allow_min_norm: bool = False, id: str = "f_linear") -> LinearPredictor:
    """Least-squares linear predictor with intercept.

    Raises when ``n <= d`` unless ``allow_min_norm`` is set, in which case
    the minimum-norm interpolant is returned.  Rank-deficient designs fall
    back to the minimum-norm solution and set ``diagnostics["rank_deficient"]``.
    """
    X, labels = _check_xy(X, labels)
    n, d = X.shape
    if n <= d and not allow_min_norm:
        raise ValueError(f"n={n} <= d={d}; pass allow_min_norm=True for the minimum-norm fit")
    sol = ols_minimum_norm(with_intercept(X), labels)
    diag = {"rank": sol.rank, "rank_deficient": sol.rank_deficient}
    return LinearPredictor(sol.weights[1:], sol.weights[0], id=id, diagnostics=diag)


def fit_overparam_predictor(X, labels, degree: int = 2, max_features: int = MAX_POLY_FEATURES,
                            id: str = "f_poly") -> PolynomialPredictor:
    """Least-squares polynomial predictor on all monomials up to ``degree``."""
    if degree < 2:
        raise ValueError("overparameterized predictor needs degree >= 2")
    X, labels = _check_xy(X, labels)
    count = poly_feature_count(X.shape[1], degree)
    if count > max_features:
        raise ValueError(f"expanded dimension {count} exceeds cap {max_features}")
    sol = ols_minimum_norm(with_intercept(poly_features(X, degree)), labels)
    diag = {"rank": sol.rank, "rank_deficient": sol.rank_deficient}
    return PolynomialPredictor(degree, sol.weights[1:], sol.weights[0], X.shape[1], id=id,
                               diagnostics=diag)


wrap_poly_features = fit_overparam_predictor


def example1_predictor(gamma: float, xi: float) -> PolynomialPredictor:
    """Scalar predictor ``gamma * x**2 + xi * x``."""
    return PolynomialPredictor(2, [xi, gamma], 0.0, 1, id=f"example1({gamma:g},{xi:g})")


def fit_neural_predictor(X, labels, m_units: int, train_config: TrainConfig = TrainConfig(),
                         id: Optional[str] = None) -> NeuralPredictor:
    X, labels = _check_xy(X, labels)
    net, diag = fit_tanh_net(X, labels, m_units, train_config)
    return NeuralPredictor(net, id=id or f"f_neural({m_units})", diagnostics=diag)


@dataclass(frozen=True)
class ShuffleSpec:
    seed: int = 0
    fraction: float = 1.0
    flip_gamma: Optional[float] = None

    def __post_init__(self):
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError("fraction must lie in [0, 1]")
        if self.flip_gamma is not None and not 0.0 <= self.flip_gamma <= 0.5:
            raise ValueError("flip_gamma must lie in [0, 0.5]")

    def apply(self, labels) -> np.ndarray:
        """Permute a random ``fraction`` of the labels, then flip binary labels."""
        labels = np.array(labels, dtype=float)
        rng = as_generator(self.seed)
        if self.fraction > 0:
            chosen = np.flatnonzero(rng.random(labels.shape[0]) < self.fraction)
            labels[chosen] = labels[rng.permutation(chosen)]
        if self.flip_gamma:
            if not np.all(np.isin(labels, (0.0, 1.0))):
                raise ValueError("label flipping requires binary labels")
            flip = rng.random(labels.shape[0]) < self.flip_gamma
            labels[flip] = 1.0 - labels[flip]
        return labels


def make_test_predictor(X, labels, spec: ShuffleSpec,
                        fit: Callable[..., Predictor] = fit_linear_predictor, **fit_kwargs) -> Predictor:
    """Fit ``fit`` (linear by default) to shuffled and/or flipped labels."""
    X, labels = _check_xy(X, labels)
    return fit(X, spec.apply(labels), **fit_kwargs)


def interpolate(theta_pred: LinearPredictor, phi_pred: LinearPredictor, rho: float,
                id: Optional[str] = None) -> LinearPredictor:
    """Parameter interpolation ``rho * theta + (1 - rho) * phi``."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    if type(theta_pred) is not type(phi_pred) or theta_pred.weights.shape != phi_pred.weights.shape:
        raise ValueError("predictors must share kind and dimension")
    w = rho * theta_pred.weights + (1 - rho) * phi_pred.weights
    b = rho * theta_pred.intercept + (1 - rho) * phi_pred.intercept
    new_id = id or f"interp({theta_pred.id},{phi_pred.id},{rho:g})"
    if isinstance(theta_pred, PolynomialPredictor):
        if theta_pred.degree != phi_pred.degree:
            raise ValueError("polynomial degrees differ")
        return PolynomialPredictor(theta_pred.degree, w, b, theta_pred.input_dim, id=new_id)
    return LinearPredictor(w, b, id=new_id)


def wrap_noise(base: Predictor, noise: NoiseSpec) -> NoisyPredictor:
    return NoisyPredictor(base, noise)


def wrap_discretize(base: Predictor, levels: Sequence[float]) -> DiscretizedPredictor:
    return DiscretizedPredictor(base, levels)


def quantile_levels(base: Predictor, X_calib, count: int = 4) -> np.ndarray:
    """``count`` levels at the bin-centre quantiles of ``base`` over a sample."""
    values = base.deterministic_view().predict(X_calib)
    return np.quantile(values, (np.arange(count) + 0.5) / count)


def predictor_from_dict(d: dict) -> Predictor:
    """Inverse of ``to_dict``; ``id`` and ``intercept`` may be omitted in hand-written specs."""
    kind = d["kind"]
    if kind == "linear":
        return LinearPredictor(d["weights"], d.get("intercept", 0.0), id=d.get("id", "linear"))
    if kind == "polynomial":
        return PolynomialPredictor(d["degree"], d["weights"], d.get("intercept", 0.0), d["input_dim"],
                                   id=d.get("id", "polynomial"))
    if kind == "neural":
        return NeuralPredictor(TanhNet.from_dict(d["net"]), id=d.get("id", "neural"))
    if kind == "composed":
        base = predictor_from_dict(d["base"])
        wrapper = d["wrapper"]
        if "noise" in wrapper:
            noise = NoiseSpec(**dict({"applies_to": "prediction"}, **wrapper["noise"]))
            return NoisyPredictor(base, noise, id=d.get("id"))
        return DiscretizedPredictor(base, wrapper["discretize"], id=d.get("id"))
    raise ValueError(f"cannot deserialize predictor kind {kind!r}")
