"""Auditors for the three identifiability routes and the discrete-prediction estimator.

* output overlap of a randomized training predictor,
* overparameterization of the training predictor relative to a basis,
* discreteness of the predictions, with a regression-discontinuity style
  estimator for separable mechanisms.
"""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from .estimators import HypothesisClass
from .linalg import ols_minimum_norm, with_intercept
from .predictors import NoisyPredictor, Predictor, poly_features
from .rng import as_generator
from .scm import CovariateSource, Dataset

ANALYTIC_FAMILIES = ("gaussian", "laplace", "uniform")


# ----------------------------------------------------------------------------
# output overlap
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class OverlapConfig:
    method: str = "auto"  # "auto", "analytic" or "empirical"
    cells_per_marginal: int = 8
    max_cells: int = 64
    window_fraction: float = 0.05
    draws_per_point: int = 200
    seed: int = 0


@dataclass
class OverlapReport:
    passed: bool
    per_cell: list
    method: str
    window: float
    warning: Optional[str] = None
    note: str = ("cell-based finite-sample check: covariates binned on a quantile grid, "
                 "prediction window of fixed half-width")

    def to_dict(self) -> dict:
        return asdict(self)


def _quantile_cells(X, per_marginal: int, max_cells: int) -> np.ndarray:
    """Integer cell id per row from a quantile grid over the covariates."""
    n, d = X.shape
    bins = per_marginal
    while bins > 1 and bins ** d > max_cells:
        bins -= 1
    ids = np.zeros(n, dtype=np.int64)
    for j in range(d):
        edges = np.quantile(X[:, j], np.linspace(0, 1, bins + 1)[1:-1])
        ids = ids * bins + np.searchsorted(edges, X[:, j], side="right")
    return ids


def _window_mass(family, scale, center, target, w):
    """P(center + noise in [target - w, target + w]) for known noise families."""
    lo, hi = target - w - center, target + w - center
    if family == "gaussian":
        return stats.norm.cdf(hi / scale) - stats.norm.cdf(lo / scale)
    if family == "laplace":
        return stats.laplace.cdf(hi / scale) - stats.laplace.cdf(lo / scale)
    return np.clip(np.minimum(hi, scale) - np.maximum(lo, -scale), 0, None) / (2 * scale)


def check_output_overlap(f_train: Predictor, f_target: Predictor, source: CovariateSource,
                         n_mc: int = 1000, config: OverlapConfig = OverlapConfig()) -> OverlapReport:
    """Does ``f_target`` satisfy output overlap with ``f_train`` on a covariate sample?

    Analytic mode handles deterministic training predictors and additive
    Gaussian, Laplace or uniform prediction noise in closed form.  Empirical
    mode redraws the training predictor ``draws_per_point`` times at every
    sampled covariate and counts draws inside the target window.
    """
    if n_mc < 100:
        raise ValueError("n_mc must be >= 100")
    rng = as_generator(config.seed)
    X = source.sample(n_mc, rng)
    target = np.asarray(f_target.predict(X, rng), dtype=float)
    if not np.all(np.isfinite(target)):
        raise ValueError("target predictions must be finite")
    base = f_train.deterministic_view().predict(X)
    spread = np.std(f_train.predict(X, rng))
    w = config.window_fraction * (spread if spread > 0 else 1.0)

    method = config.method
    warning = None
    noisy = isinstance(f_train, NoisyPredictor) and f_train.base.is_deterministic
    analytic_ok = f_train.is_deterministic or (noisy and f_train.noise.family in ANALYTIC_FAMILIES)
    if method == "auto":
        method = "analytic" if analytic_ok else "empirical"
    elif method == "analytic" and not analytic_ok:
        warning = "noise family not supported analytically; fell back to empirical"
        warnings.warn(warning)
        method = "empirical"

    if method == "analytic":
        if f_train.is_deterministic:
            tol = 1e-12 * max(1.0, float(np.max(np.abs(base))))
            point_ok = np.abs(target - base) <= tol
            mass = point_ok.astype(float)
            method_name = "analytic(point-mass)"
        else:
            noise = f_train.noise
            mass = _window_mass(noise.family, noise.scale, base, target, w)
            if noise.full_support:
                point_ok = np.ones(n_mc, dtype=bool)
            else:
                point_ok = np.abs(target - base) < noise.scale + w
            method_name = f"analytic({noise.family})"
    else:
        hits = np.zeros(n_mc)
        for _ in range(config.draws_per_point):
            hits += np.abs(f_train.predict(X, rng) - target) <= w
        mass = hits / config.draws_per_point
        point_ok = hits > 0
        method_name = "empirical(histogram)"

    cells = _quantile_cells(X, config.cells_per_marginal, config.max_cells)
    per_cell = []
    for cid in np.unique(cells):
        sel = cells == cid
        per_cell.append({
            "cell": int(cid),
            "n": int(sel.sum()),
            "target_min": float(target[sel].min()),
            "target_max": float(target[sel].max()),
            "mass": float(mass[sel].mean()),
            "verdict": bool(point_ok[sel].all()),
        })
    passed = all(c["verdict"] for c in per_cell)
    return OverlapReport(passed, per_cell, method_name, float(w), warning)


# ----------------------------------------------------------------------------
# overparameterization
# ----------------------------------------------------------------------------


@dataclass
class OverparamReport:
    residual_ratio: float
    threshold: float
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def linear_basis(dim: int) -> list[Callable]:
    """Constant plus coordinate functions."""
    return [lambda X: np.ones(len(X))] + [lambda X, j=j: X[:, j] for j in range(dim)]


def polynomial_basis(dim: int, degree: int) -> list[Callable]:
    def column(k):
        return lambda X: poly_features(X, degree)[:, k]
    from .predictors import poly_feature_count
    return [lambda X: np.ones(len(X))] + [column(k) for k in range(poly_feature_count(dim, degree))]


def check_overparameterized(f_train: Predictor, basis: Sequence[Callable], source: Optional[CovariateSource] = None,
                            n_sample: int = 1000, threshold: float = 0.01, seed=0,
                            X=None) -> OverparamReport:
    """Relative residual of projecting ``f_train`` onto the span of ``basis``.

    Pass ``X`` to use a fixed covariate sample instead of drawing from
    ``source``.
    """
    if X is None:
        X = source.sample(n_sample, as_generator(seed))
    X = np.asarray(X, dtype=float)
    if X.shape[0] <= len(basis):
        raise ValueError("sample size must exceed the basis size")
    f = f_train.deterministic_view().predict(X)
    norm = np.linalg.norm(f)
    if norm == 0:
        raise ValueError("training predictor is identically zero on the sample")
    B = np.column_stack([b(X) for b in basis])
    if not np.all(np.isfinite(B)):
        raise ValueError("basis functions must be finite on the sample")
    coef = ols_minimum_norm(B, f).weights
    ratio = float(np.linalg.norm(f - B @ coef) / norm)
    ratio = min(max(ratio, 0.0), 1.0)
    return OverparamReport(ratio, threshold, ratio > threshold)


# ----------------------------------------------------------------------------
# discreteness
# ----------------------------------------------------------------------------


@dataclass
class DiscreteReport:
    passed: bool
    level_count: int
    levels: list
    frequencies: list

    def to_dict(self) -> dict:
        return asdict(self)


def _round_sig(values, digits: int = 12) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    out = v.copy()
    nz = v != 0
    mag = np.floor(np.log10(np.abs(v[nz])))
    factor = 10.0 ** (digits - 1 - mag)
    out[nz] = np.round(v[nz] * factor) / factor
    return out


def discreteness_of(values, continuity_guard: float = 0.5) -> DiscreteReport:
    values = _round_sig(values)
    levels, counts = np.unique(values, return_counts=True)
    n = values.shape[0]
    freqs = counts / n
    passed = levels.size >= 2 and freqs.max() < 1 and levels.size <= continuity_guard * n
    return DiscreteReport(bool(passed), int(levels.size), levels.tolist(), freqs.tolist())


def check_discrete(f_train: Predictor, source: CovariateSource, n_sample: int = 1000, seed=0,
                   continuity_guard: float = 0.5) -> DiscreteReport:
    """Distinct prediction values (to 12 significant digits) on a sample.

    More than ``continuity_guard * n_sample`` levels is read as a continuous
    predictor.
    """
    if n_sample < 2:
        raise ValueError("n_sample must be >= 2")
    rng = as_generator(seed)
    X = source.sample(n_sample, rng)
    return discreteness_of(f_train.predict(X, rng), continuity_guard)


@dataclass
class RDDFit:
    """Separable fit ``g1_hat(x) + offset(level)`` for discrete predictions."""

    levels: np.ndarray
    level_offsets: dict
    offset_se: dict
    base_class: HypothesisClass
    base_weights: np.ndarray
    anchor: float
    counts: dict = field(default_factory=dict)
    residual_variance: float = 0.0

    def _base_features(self, X):
        X = np.asarray(X, dtype=float)
        if self.base_class.kind == "polynomial":
            return poly_features(X, self.base_class.degree)
        return X

    def base_fn(self, X) -> np.ndarray:
        return with_intercept(self._base_features(X)) @ self.base_weights

    def nearest_level(self, yhat) -> np.ndarray:
        yhat = np.asarray(yhat, dtype=float)
        idx = np.abs(yhat[:, None] - self.levels[None, :]).argmin(axis=1)
        return self.levels[idx]

    def offset(self, yhat) -> np.ndarray:
        lv = self.nearest_level(np.atleast_1d(yhat))
        return np.array([self.level_offsets[float(v)] for v in lv])

    def predict(self, X, yhat) -> np.ndarray:
        return self.base_fn(X) + self.offset(yhat)

    def offset_differences(self) -> np.ndarray:
        return np.array([self.level_offsets[float(v)] for v in self.levels])

    def to_dict(self) -> dict:
        return {
            "levels": self.levels.tolist(),
            "level_offsets": {repr(k): v for k, v in self.level_offsets.items()},
            "offset_se": {repr(k): v for k, v in self.offset_se.items()},
            "base_class": self.base_class.to_dict(),
            "base_weights": self.base_weights.tolist(),
            "anchor": self.anchor,
            "counts": {repr(k): v for k, v in self.counts.items()},
        }


def rdd_identify(data: Dataset, base_class: HypothesisClass = HypothesisClass("linear", False)) -> RDDFit:
    """Identify a separable mechanism from discrete predictions.

    Jointly regresses ``y`` on the base-class features of ``x`` and one
    indicator per non-anchor prediction level.  The within-level variation
    in ``x`` pins down ``g1`` and the indicator coefficients recover the
    level effects relative to the lowest (anchor) level.
    """
    if base_class.kind not in ("linear", "polynomial"):
        raise ValueError("rdd_identify supports linear or polynomial base classes")
    report = discreteness_of(data.predictions)
    if not report.passed:
        raise ValueError(f"predictions are not discrete ({report.level_count} levels on {data.n} rows)")
    rounded = _round_sig(data.predictions)
    levels = np.asarray(report.levels)
    counts = {float(v): int(c) for v, c in zip(levels, np.round(np.asarray(report.frequencies) * data.n))}
    need = data.dim + 2
    thin = [v for v, c in counts.items() if c < need]
    if thin:
        raise ValueError(f"levels with fewer than {need} observations: {thin}")

    base = poly_features(data.covariates, base_class.degree) if base_class.kind == "polynomial" else data.covariates
    indicators = np.column_stack([(rounded == v).astype(float) for v in levels[1:]])
    A = with_intercept(np.column_stack([base, indicators]))
    sol = ols_minimum_norm(A, data.outcomes)
    if sol.rank_deficient:
        raise ValueError("level indicators are collinear with the base features")
    p_base = 1 + base.shape[1]
    resid = data.outcomes - A @ sol.weights
    dof = max(data.n - A.shape[1], 1)
    sigma2 = float(resid @ resid / dof)
    cov = sigma2 * np.linalg.pinv(A.T @ A)
    offsets = {float(levels[0]): 0.0}
    ses = {float(levels[0]): 0.0}
    for k, v in enumerate(levels[1:]):
        offsets[float(v)] = float(sol.weights[p_base + k])
        ses[float(v)] = float(np.sqrt(cov[p_base + k, p_base + k]))
    return RDDFit(levels, offsets, ses, base_class, sol.weights[:p_base], float(levels[0]), counts, sigma2)


# ----------------------------------------------------------------------------
# closed-form linear case
# ----------------------------------------------------------------------------


@dataclass
class LinearCaseSolution:
    """Population meta-models when ``yhat = theta . x`` deterministically.

    ``agnostic_weights`` is the risk minimizer without the prediction; every
    member of :meth:`family` fits the training distribution equally well.
    """

    beta: np.ndarray
    alpha: float
    theta: np.ndarray
    agnostic_weights: np.ndarray

    def family(self, c: float) -> tuple[np.ndarray, float]:
        """Member with coefficient ``c`` on the prediction."""
        return self.beta + (self.alpha - c) * self.theta, float(c)

    @property
    def null_direction(self) -> np.ndarray:
        return np.concatenate([self.theta, [-1.0]])


def analytic_linear_case(beta, alpha: float, theta) -> LinearCaseSolution:
    beta = np.asarray(beta, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if beta.shape != theta.shape:
        raise ValueError("beta and theta must have the same dimension")
    return LinearCaseSolution(beta, float(alpha), theta, beta + alpha * theta)
