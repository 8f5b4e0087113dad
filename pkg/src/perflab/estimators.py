"""Empirical risk minimization for meta-models that predict Y from (X, Yhat).

Feature layout is ``[x_0, ..., x_{d-1}, yhat]`` with ``yhat`` last when the
hypothesis class includes the prediction.  Polynomial and neural classes
are separable: the covariates go through the nonlinear part and ``yhat``
enters linearly.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .linalg import ols_minimum_norm, with_intercept
from .neural import TanhNet, TrainConfig, fit_tanh_net
from .predictors import poly_feature_count, poly_features
from .scm import Dataset

KINDS = ("linear", "polynomial", "neural", "logistic", "boosted-stumps")


@dataclass(frozen=True)
class HypothesisClass:
    kind: str = "linear"
    include_prediction: bool = True
    degree: int = 2
    m_units: int = 3
    train_config: TrainConfig = field(default_factory=TrainConfig)
    rounds: int = 100
    shrinkage: float = 0.1
    iterations: int = 2000
    step: float = 1.0
    ridge: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown hypothesis class {self.kind!r}")
        if self.ridge < 0:
            raise ValueError("ridge must be >= 0")

    def without_prediction(self) -> "HypothesisClass":
        return replace(self, include_prediction=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["train_config"] = self.train_config.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "HypothesisClass":
        d = dict(d)
        if "train_config" in d:
            d["train_config"] = TrainConfig.from_dict(d["train_config"])
        return cls(**d)


def _as_2d(yhat, n):
    return np.asarray(yhat, dtype=float).reshape(n, 1)


class FittedModel:
    """Result of :func:`fit_meta_model`; immutable after construction."""

    def __init__(self, hclass: HypothesisClass, input_dim: int, params: dict, diagnostics: dict):
        self.hclass = hclass
        self.input_dim = int(input_dim)
        self.params = params
        self.diagnostics = diagnostics

    @property
    def include_prediction(self) -> bool:
        return self.hclass.include_prediction

    @property
    def rank_deficient(self) -> bool:
        return bool(self.diagnostics.get("rank_deficient", False))

    def _features(self, X, yhat):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ValueError(f"model expects {self.input_dim} covariates, got shape {X.shape}")
        if not self.include_prediction:
            return X
        if yhat is None:
            raise ValueError("this model needs predictions as an input")
        return np.column_stack([X, _as_2d(yhat, X.shape[0])])

    def predict(self, X, yhat=None) -> np.ndarray:
        kind = self.hclass.kind
        X = np.asarray(X, dtype=float)
        if kind == "linear":
            return with_intercept(self._features(X, yhat)) @ self.params["weights"]
        if kind == "polynomial":
            self._features(X, yhat)
            F = poly_features(X, self.hclass.degree)
            if self.include_prediction:
                F = np.column_stack([F, _as_2d(yhat, X.shape[0])])
            return with_intercept(F) @ self.params["weights"]
        if kind == "neural":
            self._features(X, yhat)
            Xl = _as_2d(yhat, X.shape[0]) if self.include_prediction else None
            return self.params["net"](X, Xl)
        if kind == "logistic":
            Z = (self._features(X, yhat) - self.params["mean"]) / self.params["scale"]
            return _sigmoid(Z @ self.params["coef"] + self.params["intercept"])
        return _stumps_predict(self.params, self._features(X, yhat))

    # coefficient helpers for the linear family
    @property
    def intercept(self) -> float:
        return float(self.params["weights"][0])

    @property
    def coef_x(self) -> np.ndarray:
        w = self.params["weights"]
        end = 1 + self.input_dim
        return np.asarray(w[1:end])

    @property
    def coef_yhat(self) -> float:
        if not self.include_prediction:
            raise ValueError("model does not use the prediction")
        if self.hclass.kind == "neural":
            return float(self.params["net"].linear_coefficients()[0])
        return float(self.params["weights"][-1])

    def to_dict(self) -> dict:
        params = {}
        for k, v in self.params.items():
            if isinstance(v, TanhNet):
                params[k] = v.to_dict()
            elif isinstance(v, np.ndarray):
                params[k] = v.tolist()
            else:
                params[k] = v
        diag = {k: v for k, v in self.diagnostics.items() if k != "loss_history"}
        return {"class": self.hclass.to_dict(), "input_dim": self.input_dim,
                "params": params, "diagnostics": diag}

    @classmethod
    def from_dict(cls, d: dict) -> "FittedModel":
        hclass = HypothesisClass.from_dict(d["class"])
        params = {}
        for k, v in d["params"].items():
            if k == "net":
                params[k] = TanhNet.from_dict(v)
            elif isinstance(v, list) and k != "stumps":
                params[k] = np.asarray(v, dtype=float)
            else:
                params[k] = v
        return cls(hclass, d["input_dim"], params, d["diagnostics"])


# ----------------------------------------------------------------------------
# linear family
# ----------------------------------------------------------------------------


def _least_squares(F, y, ridge: float):
    A = with_intercept(F)
    if ridge > 0:
        # penalize everything except the intercept
        pen = np.sqrt(ridge * A.shape[0]) * np.eye(A.shape[1])[1:]
        A_aug = np.vstack([A, pen])
        y_aug = np.concatenate([y, np.zeros(pen.shape[0])])
        sol = ols_minimum_norm(A_aug, y_aug)
    else:
        sol = ols_minimum_norm(A, y)
    resid = y - A @ sol.weights
    diag = {"final_risk": float(np.mean(resid ** 2)), "iterations": 1,
            "rank": sol.rank, "rank_deficient": sol.rank_deficient}
    return sol.weights, diag


# ----------------------------------------------------------------------------
# logistic regression
# ----------------------------------------------------------------------------


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def fit_logistic(F, y, iterations: int = 2000, step: float = 1.0, tol: float = 1e-6):
    """Gradient ascent on the mean log-likelihood over z-scored features."""
    F = np.asarray(F, dtype=float)
    y = np.asarray(y, dtype=float)
    mean = F.mean(axis=0)
    scale = F.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    Z = (F - mean) / scale
    n, p = Z.shape
    coef = np.zeros(p)
    b = 0.0
    gnorm = np.inf
    it = 0
    for it in range(1, iterations + 1):
        r = y - _sigmoid(Z @ coef + b)
        g_coef = Z.T @ r / n
        g_b = r.mean()
        gnorm = float(np.sqrt(g_coef @ g_coef + g_b * g_b))
        if gnorm < tol:
            break
        coef += step * g_coef
        b += step * g_b
    prob = np.clip(_sigmoid(Z @ coef + b), 1e-15, 1 - 1e-15)
    loss = float(-np.mean(y * np.log(prob) + (1 - y) * np.log(1 - prob)))
    params = {"coef": coef, "intercept": float(b), "mean": mean, "scale": scale}
    diag = {"final_risk": loss, "iterations": it, "grad_norm": gnorm, "converged": gnorm < tol}
    return params, diag


# ----------------------------------------------------------------------------
# boosted stumps
# ----------------------------------------------------------------------------


def _best_stump(Fs_sorted, order, r):
    """Best single split over all features for residuals ``r``."""
    n = r.shape[0]
    total = r.sum()
    best = (0.0, None)
    for j in range(order.shape[1]):
        rs = r[order[:, j]]
        cs = np.cumsum(rs)[:-1]
        left_n = np.arange(1, n)
        vals = Fs_sorted[:, j]
        valid = vals[1:] > vals[:-1]
        if not valid.any():
            continue
        gain = cs ** 2 / left_n + (total - cs) ** 2 / (n - left_n)
        gain = np.where(valid, gain, -np.inf)
        k = int(np.argmax(gain))
        if gain[k] > best[0]:
            thr = 0.5 * (vals[k] + vals[k + 1])
            left = cs[k] / (k + 1)
            right = (total - cs[k]) / (n - k - 1)
            best = (gain[k], (j, float(thr), float(left), float(right)))
    return best[1]


def fit_boosted_stumps(F, y, rounds: int = 100, shrinkage: float = 0.1):
    """Stagewise least-squares boosting of depth-1 trees."""
    F = np.asarray(F, dtype=float)
    y = np.asarray(y, dtype=float)
    order = np.argsort(F, axis=0, kind="stable")
    Fs_sorted = np.take_along_axis(F, order, axis=0)
    base = float(y.mean())
    fitted = np.full(y.shape, base)
    stumps = []
    for _ in range(rounds):
        stump = _best_stump(Fs_sorted, order, y - fitted)
        if stump is None:
            break
        j, thr, left, right = stump
        stumps.append([j, thr, shrinkage * left, shrinkage * right])
        fitted += np.where(F[:, j] <= thr, shrinkage * left, shrinkage * right)
    params = {"base": base, "stumps": stumps}
    diag = {"final_risk": float(np.mean((y - fitted) ** 2)), "iterations": len(stumps)}
    return params, diag


def _stumps_predict(params, F):
    out = np.full(F.shape[0], params["base"])
    for j, thr, left, right in params["stumps"]:
        out += np.where(F[:, int(j)] <= thr, left, right)
    return out


# ----------------------------------------------------------------------------
# entry points
# ----------------------------------------------------------------------------


def fit_arrays(X, y, hclass: HypothesisClass, yhat=None) -> FittedModel:
    """Fit ``hclass`` on raw arrays; ``yhat`` is required iff the class uses it."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    if n == 0:
        raise ValueError("cannot fit on an empty dataset")
    if n < 2:
        raise ValueError("need at least two rows")
    cols = [X, y] + ([np.asarray(yhat, dtype=float)] if hclass.include_prediction else [])
    for c in cols:
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite values in the training data")
    d = X.shape[1]
    F = np.column_stack([X, _as_2d(yhat, n)]) if hclass.include_prediction else X
    kind = hclass.kind
    if kind == "linear":
        w, diag = _least_squares(F, y, hclass.ridge)
        params = {"weights": w}
    elif kind == "polynomial":
        P = poly_features(X, hclass.degree)
        if hclass.include_prediction:
            P = np.column_stack([P, _as_2d(yhat, n)])
        w, diag = _least_squares(P, y, hclass.ridge)
        params = {"weights": w}
        diag["feature_count"] = poly_feature_count(d, hclass.degree)
    elif kind == "neural":
        Xl = _as_2d(yhat, n) if hclass.include_prediction else None
        net, diag = fit_tanh_net(X, y, hclass.m_units, hclass.train_config, Xl=Xl)
        params = {"net": net}
    elif kind == "logistic":
        params, diag = fit_logistic(F, y, hclass.iterations, hclass.step)
    else:
        params, diag = fit_boosted_stumps(F, y, hclass.rounds, hclass.shrinkage)
    return FittedModel(hclass, d, params, diag)


def fit_meta_model(data: Dataset, hclass: HypothesisClass) -> FittedModel:
    """Empirical risk minimizer of ``hclass`` on ``data``.

    Squared loss for the regression classes, log loss for ``logistic``.
    Rank-deficient linear/polynomial designs get the minimum-norm solution
    with ``diagnostics["rank_deficient"] = True``.
    """
    if data.n == 0:
        raise ValueError("cannot fit on an empty dataset")
    return fit_arrays(data.covariates, data.outcomes, hclass,
                      data.predictions if hclass.include_prediction else None)


def evaluate(model: FittedModel, data: Dataset, metric: str = "rmse") -> float:
    if data.dim != model.input_dim:
        raise ValueError(f"model expects {model.input_dim} covariates, dataset has {data.dim}")
    pred = model.predict(data.covariates, data.predictions if model.include_prediction else None)
    if metric == "rmse":
        return rmse(pred, data.outcomes)
    if metric == "accuracy":
        return accuracy(pred, data.outcomes)
    raise ValueError(f"unknown metric {metric!r}")


def rmse(pred, target) -> float:
    r = np.asarray(pred, dtype=float) - np.asarray(target, dtype=float)
    return float(np.sqrt(np.mean(r * r)))


def accuracy(pred, labels, threshold: float = 0.5) -> float:
    return float(np.mean((np.asarray(pred) >= threshold) == (np.asarray(labels) >= threshold)))
