"""Structural causal model X -> Yhat -> Y (with the direct edge X -> Y).

Data are generated as::

    x    ~ D_X
    yhat = f(x, xi_f)
    y    = g(x, yhat) + xi_Y

The deployed predictor ``f`` is the intervention object; the outcome
mechanism ``g`` stays fixed when ``f`` changes.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .rng import SeedPlan, as_generator

NOISE_FAMILIES = ("none", "gaussian", "laplace", "uniform")


# ----------------------------------------------------------------------------
# covariates
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class CovariateSource:
    """Distribution of the covariates.

    ``kind="synthetic-gaussian"`` draws independent normals with the given
    mean vector and diagonal variances; ``kind="table"`` samples rows of a
    fixed matrix uniformly with replacement.
    """

    kind: str
    dim: int
    mean: Optional[np.ndarray] = None
    variance: Optional[np.ndarray] = None
    rows: Optional[np.ndarray] = None

    @classmethod
    def gaussian(cls, dim: int, mean=None, variance=None) -> "CovariateSource":
        mean = np.zeros(dim) if mean is None else np.asarray(mean, dtype=float)
        variance = np.ones(dim) if variance is None else np.asarray(variance, dtype=float)
        if mean.shape != (dim,) or variance.shape != (dim,):
            raise ValueError("mean and variance must have length dim")
        if np.any(variance < 0):
            raise ValueError("variances must be non-negative")
        return cls("synthetic-gaussian", dim, mean=mean, variance=variance)

    @classmethod
    def table(cls, rows) -> "CovariateSource":
        rows = np.asarray(rows, dtype=float)
        if rows.ndim != 2 or rows.shape[0] == 0:
            raise ValueError("table rows must be a non-empty 2-d array")
        if not np.all(np.isfinite(rows)):
            raise ValueError("table rows must be finite")
        return cls("table", rows.shape[1], rows=rows)

    def sample(self, n: int, rng) -> np.ndarray:
        rng = as_generator(rng)
        if self.kind == "synthetic-gaussian":
            z = rng.standard_normal((n, self.dim))
            return self.mean + z * np.sqrt(self.variance)
        if self.kind == "table":
            idx = rng.integers(0, self.rows.shape[0], size=n)
            return self.rows[idx]
        raise ValueError(f"unknown covariate source kind {self.kind!r}")

    def describe(self) -> dict:
        if self.kind == "table":
            return {"kind": "table", "dim": self.dim, "n_rows": int(self.rows.shape[0])}
        return {
            "kind": self.kind,
            "dim": self.dim,
            "mean": self.mean.tolist(),
            "variance": self.variance.tolist(),
        }


# ----------------------------------------------------------------------------
# noise
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseSpec:
    """Additive exogenous noise.

    ``scale`` is the standard deviation for ``gaussian``, the Laplace scale
    ``b`` for ``laplace`` and the half-width for ``uniform``.
    """

    family: str = "none"
    scale: float = 0.0
    applies_to: str = "outcome"

    def __post_init__(self):
        if self.family not in NOISE_FAMILIES:
            raise ValueError(f"unknown noise family {self.family!r}")
        if self.applies_to not in ("prediction", "outcome"):
            raise ValueError("applies_to must be 'prediction' or 'outcome'")
        if self.scale < 0 or not np.isfinite(self.scale):
            raise ValueError("noise scale must be finite and non-negative")
        if self.family in ("laplace", "uniform") and self.scale == 0:
            raise ValueError(f"{self.family} noise needs a positive scale")

    @property
    def is_zero(self) -> bool:
        return self.family == "none" or self.scale == 0.0

    @property
    def full_support(self) -> bool:
        return self.family in ("gaussian", "laplace") and self.scale > 0

    def sample(self, size, rng) -> np.ndarray:
        rng = as_generator(rng)
        if self.is_zero:
            return np.zeros(size)
        if self.family == "gaussian":
            return self.scale * rng.standard_normal(size)
        if self.family == "laplace":
            return rng.laplace(0.0, self.scale, size)
        return rng.uniform(-self.scale, self.scale, size)

    def to_dict(self) -> dict:
        return {"family": self.family, "scale": self.scale, "applies_to": self.applies_to}


def gaussian_noise(sigma: float, applies_to: str = "outcome") -> NoiseSpec:
    return NoiseSpec("gaussian" if sigma > 0 else "none", float(sigma), applies_to)


# ----------------------------------------------------------------------------
# outcome mechanism
# ----------------------------------------------------------------------------


class TableLabelLookup:
    """Base function mapping each row of a covariate table to its label."""

    def __init__(self, rows, labels):
        rows = np.ascontiguousarray(rows, dtype=float)
        labels = np.asarray(labels, dtype=float)
        if rows.shape[0] != labels.shape[0]:
            raise ValueError("rows and labels differ in length")
        self.dim = rows.shape[1]
        self._index = {r.tobytes(): float(v) for r, v in zip(rows, labels)}

    def __call__(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=float)
        try:
            return np.array([self._index[r.tobytes()] for r in X])
        except KeyError:
            raise KeyError("covariate row not present in the label table") from None

    def to_dict(self) -> dict:
        return {"kind": "table-label-lookup", "n_rows": len(self._index)}


@dataclass
class OutcomeMechanism:
    """``g(x, yhat)`` plus outcome noise.

    ``performativity="linear"`` gives ``g = g1(x) + strength * yhat``;
    ``"replace"`` returns ``yhat`` with probability ``strength`` and ``g1(x)``
    otherwise.
    """

    base_fn: Callable[[np.ndarray], np.ndarray]
    performativity: str = "linear"
    strength: float = 0.0
    noise: NoiseSpec = field(default_factory=NoiseSpec)

    def __post_init__(self):
        if self.performativity not in ("linear", "replace"):
            raise ValueError(f"unknown performativity {self.performativity!r}")
        if self.performativity == "linear" and self.strength < 0:
            raise ValueError("linear performativity strength must be >= 0")
        if self.performativity == "replace" and not 0 <= self.strength <= 1:
            raise ValueError("replacement probability must lie in [0, 1]")

    @property
    def dim(self) -> Optional[int]:
        return getattr(self.base_fn, "dim", None)

    def expected(self, X, yhat) -> np.ndarray:
        """E[Y | X=x, do(Yhat=yhat)]; exact, no sampling."""
        g1 = np.asarray(self.base_fn(X), dtype=float)
        yhat = np.asarray(yhat, dtype=float)
        if self.performativity == "linear":
            return g1 + self.strength * yhat
        p = self.strength
        return p * yhat + (1 - p) * g1

    def sample(self, X, yhat, rng) -> np.ndarray:
        rng = as_generator(rng)
        yhat = np.asarray(yhat, dtype=float)
        if self.performativity == "linear":
            mean = np.asarray(self.base_fn(X), dtype=float) + self.strength * yhat
        else:
            replace = rng.random(yhat.shape[0]) < self.strength
            mean = np.where(replace, yhat, np.asarray(self.base_fn(X), dtype=float))
        if self.noise.is_zero:
            return mean
        return mean + self.noise.sample(yhat.shape[0], rng)

    def to_dict(self) -> dict:
        base = self.base_fn.to_dict() if hasattr(self.base_fn, "to_dict") else {"kind": "callable"}
        return {
            "base_fn": base,
            "performativity": self.performativity,
            "strength": self.strength,
            "noise": self.noise.to_dict(),
        }


def ground_truth_m_y(mechanism: OutcomeMechanism, x, yhat) -> float | np.ndarray:
    """Ground-truth counterfactual mean ``E[Y | X=x, do(Yhat=yhat)]``.

    Accepts a single covariate vector with scalar ``yhat`` or a matrix of
    rows with a vector of predictions.
    """
    x = np.asarray(x, dtype=float)
    yhat_arr = np.asarray(yhat, dtype=float)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(yhat_arr))):
        raise ValueError("inputs must be finite")
    if x.ndim == 1:
        return float(mechanism.expected(x[None, :], yhat_arr.reshape(1))[0])
    return mechanism.expected(x, yhat_arr)


# ----------------------------------------------------------------------------
# datasets
# ----------------------------------------------------------------------------


@dataclass
class Dataset:
    covariates: np.ndarray
    predictions: np.ndarray
    outcomes: np.ndarray
    provenance: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.covariates = np.asarray(self.covariates, dtype=float)
        self.predictions = np.asarray(self.predictions, dtype=float)
        self.outcomes = np.asarray(self.outcomes, dtype=float)
        if self.covariates.ndim != 2:
            raise ValueError("covariates must be an n x d matrix")
        n = self.covariates.shape[0]
        if self.predictions.shape != (n,) or self.outcomes.shape != (n,):
            raise ValueError("covariates, predictions and outcomes must share row count")
        for name, col in self.extra.items():
            if np.asarray(col).shape != (n,):
                raise ValueError(f"extra column {name!r} has wrong length")

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def dim(self) -> int:
        return self.covariates.shape[1]

    def subset(self, idx) -> "Dataset":
        prov = dict(self.provenance, subset=True)
        extra = {k: np.asarray(v)[idx] for k, v in self.extra.items()}
        return Dataset(self.covariates[idx], self.predictions[idx], self.outcomes[idx], prov, extra)

    def header(self) -> list[str]:
        return [f"x{j}" for j in range(self.dim)] + ["yhat", "y"] + list(self.extra)

    def to_array(self) -> np.ndarray:
        cols = [self.covariates, self.predictions[:, None], self.outcomes[:, None]]
        cols += [np.asarray(v, dtype=float)[:, None] for v in self.extra.values()]
        return np.hstack(cols)

    def to_csv(self, path) -> None:
        """Write ``x0,...,x{d-1},yhat,y[,extra]`` plus ``<path>.json`` provenance."""
        path = Path(path)
        np.savetxt(path, self.to_array(), delimiter=",", header=",".join(self.header()),
                   comments="", fmt="%.17g")
        sidecar = path.with_suffix(path.suffix + ".json")
        sidecar.write_text(json.dumps(self.provenance, indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        path = Path(path)
        with open(path) as fh:
            header = fh.readline().strip().split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        d = header.index("yhat")
        prov = {}
        sidecar = path.with_suffix(path.suffix + ".json")
        if sidecar.exists():
            prov = json.loads(sidecar.read_text())
        extra = {name: data[:, d + 2 + k] for k, name in enumerate(header[d + 2:])}
        return cls(data[:, :d], data[:, d], data[:, d + 1], prov, extra)


def _first_nonfinite(*arrays) -> Optional[int]:
    bad = np.zeros(arrays[0].shape[0], dtype=bool)
    for a in arrays:
        a = np.asarray(a)
        bad |= ~np.isfinite(a.reshape(a.shape[0], -1)).all(axis=1)
    hits = np.flatnonzero(bad)
    return int(hits[0]) if hits.size else None


def generate_dataset(source: CovariateSource, predictor, mechanism: OutcomeMechanism,
                     n: int, seeds: SeedPlan, X: Optional[np.ndarray] = None) -> Dataset:
    """Sample ``n`` i.i.d. rows ``(x, yhat, y)`` from the SCM under ``predictor``.

    Covariates, prediction noise and outcome noise come from separate
    streams of ``seeds``; pass ``X`` to reuse a fixed covariate sample.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    in_dim = getattr(predictor, "input_dim", None)
    if in_dim is not None and in_dim != source.dim:
        raise ValueError(f"predictor expects {in_dim} covariates, source provides {source.dim}")
    if mechanism.dim is not None and mechanism.dim != source.dim:
        raise ValueError(f"mechanism expects {mechanism.dim} covariates, source provides {source.dim}")
    if X is None:
        X = source.sample(n, seeds.rng("covariates"))
    elif X.shape != (n, source.dim):
        raise ValueError("fixed covariate sample has the wrong shape")
    yhat = np.asarray(predictor.predict(X, seeds.rng("prediction")), dtype=float)
    bad = _first_nonfinite(yhat)
    if bad is not None:
        raise FloatingPointError(f"predictor produced a non-finite value at row {bad}")
    y = mechanism.sample(X, yhat, seeds.rng("outcome"))
    bad = _first_nonfinite(y)
    if bad is not None:
        raise FloatingPointError(f"outcome mechanism produced a non-finite value at row {bad}")
    provenance = {
        "predictor_id": getattr(predictor, "id", "anonymous"),
        "mechanism": mechanism.to_dict(),
        "source": source.describe(),
        "seeds": seeds.to_dict(),
        "n": int(n),
    }
    if source.kind == "synthetic-gaussian":
        provenance["synthetic_covariates"] = True
    return Dataset(X, yhat, y, provenance)


# ----------------------------------------------------------------------------
# ground-truth quantities
# ----------------------------------------------------------------------------


def jackknife_mean_se(values) -> float:
    """Jackknife standard error of a sample mean.

    For the mean the leave-one-out pseudo-values are the observations
    themselves, so this reduces to ``std(ddof=1) / sqrt(n)``.
    """
    v = np.asarray(values, dtype=float)
    n = v.shape[0]
    if n < 2:
        raise ValueError("at least two draws are needed for a standard error")
    loo = (v.sum() - v) / (n - 1)
    return float(np.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))


def _deterministic(predictor):
    return predictor.deterministic_view() if hasattr(predictor, "deterministic_view") else predictor


def prediction_distance_sq(f_a, f_b, source: CovariateSource, n_mc: int, seed) -> tuple[float, float]:
    """Monte Carlo estimate of ``E_x (f_a(x) - f_b(x))^2`` with its jackknife SE.

    Both predictors are evaluated through their deterministic views.
    """
    if n_mc < 2:
        raise ValueError("n_mc must be >= 2")
    X = source.sample(n_mc, as_generator(seed))
    diff = _deterministic(f_a).predict(X) - _deterministic(f_b).predict(X)
    sq = diff * diff
    return float(sq.mean()), jackknife_mean_se(sq)


def prop1_bounds(alpha: float, d_sq: float, mu: float = 2.0, gamma: float = 2.0) -> tuple[float, float]:
    """Sandwich on the extrapolation loss of the performativity-agnostic risk minimizer.

    ``mu`` and ``gamma`` are the strong-convexity and smoothness constants of
    the loss in its second argument; squared loss has ``mu = gamma = 2`` and
    the two bounds coincide at ``alpha**2 * d_sq``.
    """
    if alpha < 0 or d_sq < 0:
        raise ValueError("alpha and d_sq must be non-negative")
    if not 0 < mu <= gamma:
        raise ValueError("need 0 < mu <= gamma")
    core = alpha * alpha * d_sq
    return 0.5 * mu * core, 0.5 * gamma * core


def counterfactual_metric(model, kappa, source: CovariateSource, predictor, n_mc: int,
                          seed) -> tuple[float, float]:
    """Estimate ``E[kappa(X, Y, Yhat)]`` under ``do(Yhat = predictor(X))``.

    ``model`` is either an :class:`OutcomeMechanism` (outcomes sampled from
    the ground truth) or a fitted meta-model exposing ``predict(X, yhat)``.
    Returns the Monte Carlo mean and its jackknife standard error.
    """
    rng = as_generator(seed)
    X = source.sample(n_mc, rng)
    yhat = np.asarray(predictor.predict(X, rng), dtype=float)
    if isinstance(model, OutcomeMechanism):
        y = model.sample(X, yhat, rng)
    else:
        y = np.asarray(model.predict(X, yhat), dtype=float)
    vals = np.broadcast_to(np.asarray(kappa(X, y, yhat), dtype=float), (n_mc,))
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("kappa returned a non-finite value")
    return float(vals.mean()), jackknife_mean_se(vals)
