"""Replicate-averaged experiment grids.

Every template builds a training predictor ``f_theta`` and a test predictor
``f_phi`` from a base dataset, samples a training set under ``f_theta`` and
a test set under ``f_phi`` from the same outcome mechanism, and compares
three meta-models on the test set:

``with-yhat``     fit on the training set using ``(x, yhat)``
``without-yhat``  fit on the training set using ``x`` only
``baseline``      fit on a fresh sample from the test distribution

Cells (sweep value x replicate) are independent and seeded only by
``(seed, replicate)``, so every sweep value of one replicate shares its base
data and noise draws.  Results never depend on execution order or worker
count.
"""
from __future__ import annotations

import csv
import functools
import io as _stdio
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from threadpoolctl import threadpool_limits

from .estimators import HypothesisClass, evaluate, fit_arrays, fit_meta_model
from .io import ConfigError, dump_json, load_covariates
from .neural import TrainConfig
from .predictors import (DiscretizedPredictor, ModelPredictor, NoisyPredictor, ShuffleSpec,
                         fit_linear_predictor, fit_neural_predictor, fit_overparam_predictor,
                         interpolate, make_test_predictor, quantile_levels)
from .rng import SeedPlan
from .scm import (CovariateSource, NoiseSpec, OutcomeMechanism, TableLabelLookup, generate_dataset,
                  prediction_distance_sq)

CONDITIONS = ("with-yhat", "without-yhat", "baseline")
ALPHA_GRID = [0.0, 0.25, 0.5, 0.75, 1.0]

_COMMON = {
    "alpha": 0.5,
    "replicates": 10,
    "n_train": 200_000,
    "n_test": 50_000,
    "n_base": 20_000,
    "covariates": {"kind": "synthetic", "dim": 5},
}

TEMPLATES = {
    "fig3a-noniden": {"sweep": ("alpha", ALPHA_GRID)},
    "fig3b-random": {"sweep": ("alpha", ALPHA_GRID)},
    "fig3c-overparam": {"sweep": ("alpha", ALPHA_GRID)},
    "fig3d-discrete": {"sweep": ("alpha", ALPHA_GRID)},
    "fig4a-width-sweep": {"sweep": ("m_theta", [1, 2, 3, 4, 8, 16]),
                          "n_train": 5_000, "n_test": 10_000, "n_base": 5_000},
    "fig4b-noise-sweep": {"sweep": ("noise_scale", [0.0, 0.01, 0.05, 0.1, 0.5, 1.0])},
    "fig5a-trainsize-sweep": {"sweep": ("n_train", [500, 2_000, 10_000, 50_000])},
    "fig5b-trainsize-sweep": {"sweep": ("n_train", [500, 2_000, 10_000, 50_000])},
    "fig5c-shift-sweep": {"sweep": ("rho", [1.0, 0.8, 0.6, 0.4, 0.2, 0.0]), "n_train": 5_000,
                          "options": {"prediction_noise": 0.3}},
    "appD-misspec": {"sweep": ("p", [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]),
                     "n_train": 20_000, "n_test": 20_000, "n_base": 10_000},
}

ALLOWED_SWEEPS = {
    "fig3a-noniden": {"alpha"},
    "fig3b-random": {"alpha"},
    "fig3c-overparam": {"alpha"},
    "fig3d-discrete": {"alpha"},
    "fig4a-width-sweep": {"m_theta"},
    "fig4b-noise-sweep": {"noise_scale"},
    "fig5a-trainsize-sweep": {"n_train"},
    "fig5b-trainsize-sweep": {"n_train"},
    "fig5c-shift-sweep": {"rho"},
    "appD-misspec": {"p", "gamma"},
}

DEFAULT_OPTIONS = {
    "label_nonlinearity": 1.0,  # weight of the quadratic part of the synthetic labels
    "prediction_noise": 1.0,  # std of the Gaussian noise on randomized predictions
    "outcome_noise": 1.0,
    "levels": 4,
    "degree": 2,
    "m_g": 3,
    "m_theta": 4,
    "optimizer": "adam",  # neural fits in fig4a: "adam" (mini-batch) or "lbfgs"
    "epochs": 200,
    "restarts": 1,
    "maxiter": 300,
    "rho": 0.0,
    "noise_scale": 1.0,
    "gamma": 0.45,
    "variant": "standard",  # appD only: "reversed" fits f_theta to the noisy labels
    "rounds": 100,
}


# ----------------------------------------------------------------------------
# spec
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentSpec:
    template: str
    sweep_parameter: str
    sweep_values: tuple
    n_train: int
    n_test: int
    replicates: int = 10
    alpha: float = 0.5
    seed: int = 0
    n_base: int = 20_000
    covariates: dict = field(default_factory=lambda: {"kind": "synthetic", "dim": 5})
    options: dict = field(default_factory=dict)
    description: str = ""

    def option(self, name):
        return self.options.get(name, DEFAULT_OPTIONS[name])

    def to_dict(self) -> dict:
        return {
            "template": self.template,
            "sweep": {"parameter": self.sweep_parameter, "values": list(self.sweep_values)},
            "n_train": self.n_train,
            "n_test": self.n_test,
            "replicates": self.replicates,
            "alpha": self.alpha,
            "seed": self.seed,
            "n_base": self.n_base,
            "covariates": dict(self.covariates),
            "options": {k: self.options.get(k, v) for k, v in DEFAULT_OPTIONS.items()},
            "description": self.description,
        }

    @classmethod
    def from_dict(cls, d: dict, seed: Optional[int] = None) -> "ExperimentSpec":
        """Validate a JSON spec, filling template defaults.

        Errors name the offending field as a JSON pointer.
        """
        if not isinstance(d, dict):
            raise ConfigError("/: spec must be a JSON object")
        known = {"template", "sweep", "n_train", "n_test", "replicates", "alpha", "p", "seed",
                 "n_base", "covariates", "options", "description"}
        for key in d:
            if key not in known:
                raise ConfigError(f"/{key}: unknown field")
        template = d.get("template")
        if template not in TEMPLATES:
            raise ConfigError(f"/template: expected one of {sorted(TEMPLATES)}, got {template!r}")
        defaults = dict(_COMMON, **TEMPLATES[template])
        param, values = defaults["sweep"]
        sweep = d.get("sweep", {})
        if not isinstance(sweep, dict):
            raise ConfigError("/sweep: expected an object with 'parameter' and 'values'")
        param = sweep.get("parameter", param)
        if param not in ALLOWED_SWEEPS[template]:
            raise ConfigError(f"/sweep/parameter: {param!r} not allowed for {template} "
                              f"(allowed: {sorted(ALLOWED_SWEEPS[template])})")
        if "values" in sweep:
            values = sweep["values"]
        elif param != defaults["sweep"][0]:
            values = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5] if param == "gamma" else None
        if not isinstance(values, list) or not values:
            raise ConfigError("/sweep/values: expected a non-empty list")
        for i, v in enumerate(values):
            _check_sweep_value(param, v, f"/sweep/values/{i}")

        def integer(name, minimum):
            v = d.get(name, defaults[name])
            if not isinstance(v, int) or isinstance(v, bool) or v < minimum:
                raise ConfigError(f"/{name}: expected an integer >= {minimum}, got {v!r}")
            return v

        replicates = integer("replicates", 1)
        n_train = integer("n_train", 2)
        n_test = integer("n_test", 2)
        n_base = integer("n_base", 10)
        if "alpha" in d and "p" in d:
            raise ConfigError("/p: give either alpha or p, not both")
        alpha = d.get("p", d.get("alpha", defaults["alpha"]))
        if not isinstance(alpha, (int, float)) or isinstance(alpha, bool) or alpha < 0:
            raise ConfigError(f"/alpha: expected a non-negative number, got {alpha!r}")
        if template == "appD-misspec" and alpha > 1:
            raise ConfigError("/p: probability must lie in [0, 1]")
        s = seed if seed is not None else d.get("seed", 0)
        if not isinstance(s, int) or isinstance(s, bool) or s < 0:
            raise ConfigError(f"/seed: expected a non-negative integer, got {s!r}")
        cov = d.get("covariates", defaults["covariates"])
        _check_covariates(cov)
        options = d.get("options", {})
        if not isinstance(options, dict):
            raise ConfigError("/options: expected an object")
        options = dict(defaults.get("options", {}), **options)
        for key, v in options.items():
            if key not in DEFAULT_OPTIONS:
                raise ConfigError(f"/options/{key}: unknown option")
            if key == "variant":
                if v not in ("standard", "reversed"):
                    raise ConfigError("/options/variant: expected 'standard' or 'reversed'")
            elif key == "optimizer":
                if v not in ("adam", "lbfgs"):
                    raise ConfigError("/options/optimizer: expected 'adam' or 'lbfgs'")
            elif not isinstance(v, (int, float)) or isinstance(v, bool):
                raise ConfigError(f"/options/{key}: expected a number")
        description = d.get("description", "")
        if not isinstance(description, str):
            raise ConfigError("/description: expected a string")
        return cls(template, param, tuple(values), n_train, n_test, replicates, float(alpha), s,
                   n_base, dict(cov), dict(options), description)

    @classmethod
    def default(cls, template: str, **overrides) -> "ExperimentSpec":
        return cls.from_dict(dict({"template": template}, **overrides))


def _check_sweep_value(param, v, pointer):
    if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
        raise ConfigError(f"{pointer}: expected a finite number, got {v!r}")
    if param in ("m_theta", "n_train") and (int(v) != v or v < 1):
        raise ConfigError(f"{pointer}: expected a positive integer")
    if param in ("rho", "p") and not 0 <= v <= 1:
        raise ConfigError(f"{pointer}: must lie in [0, 1]")
    if param == "gamma" and not 0 <= v <= 0.5:
        raise ConfigError(f"{pointer}: must lie in [0, 0.5]")
    if param in ("alpha", "noise_scale") and v < 0:
        raise ConfigError(f"{pointer}: must be non-negative")


def _check_covariates(cov):
    if not isinstance(cov, dict) or cov.get("kind") not in ("synthetic", "csv"):
        raise ConfigError("/covariates/kind: expected 'synthetic' or 'csv'")
    if cov["kind"] == "synthetic":
        dim = cov.get("dim", 5)
        if not isinstance(dim, int) or dim < 1:
            raise ConfigError("/covariates/dim: expected a positive integer")
    elif not isinstance(cov.get("path"), str):
        raise ConfigError("/covariates/path: expected a file path")


# ----------------------------------------------------------------------------
# base data
# ----------------------------------------------------------------------------


def label_weights(dim: int) -> np.ndarray:
    base = np.array([2.0, -1.5, 1.0, 2.5, -1.0])
    return np.resize(base, dim)


def synthetic_signal(X, nonlinearity: float = 1.0) -> np.ndarray:
    """Noise-free synthetic label: intercept 30, linear trend, quadratic terms.

    The quadratic part couples neighbouring coordinates with alternating
    signs and adds centred squares, so it has mean zero under standard
    normal covariates.
    """
    X = np.asarray(X, dtype=float)
    d = X.shape[1]
    lin = 30.0 + X @ label_weights(d)
    if d == 1:
        quad = 0.3 * (X[:, 0] ** 2 - 1)
    else:
        signs = np.where(np.arange(d) % 2 == 0, 1.0, -1.0)
        quad = 0.5 * (signs * X * np.roll(X, -1, axis=1)).sum(axis=1) + 0.3 * (X ** 2 - 1).sum(axis=1)
    return lin + nonlinearity * quad


@functools.lru_cache(maxsize=4)
def _cached_table(path: str, label_column: Optional[str]):
    return load_covariates(path, label_column)


@dataclass
class BaseData:
    X: np.ndarray
    labels: np.ndarray
    source: CovariateSource


def base_data(spec: ExperimentSpec, seeds: SeedPlan, binary: bool = False) -> BaseData:
    """Covariates and labels the predictors are fit to.

    Synthetic mode draws ``n_base`` Gaussian rows and labels from
    :func:`synthetic_signal` plus unit noise (or, with ``binary``, a
    logistic draw around the centred signal).  CSV mode uses the table rows
    and its label column, synthesizing labels when none is named.
    """
    cov = spec.covariates
    q = spec.option("label_nonlinearity")
    if cov["kind"] == "csv":
        table = _cached_table(cov["path"], cov.get("label_column"))
        X = table.values
        labels = table.labels
        if labels is None:
            labels = synthetic_signal((X - X.mean(0)) / np.where(X.std(0) > 0, X.std(0), 1), q)
            labels = labels + seeds.rng("base-labels").standard_normal(X.shape[0])
        if binary and not np.all(np.isin(labels, (0.0, 1.0))):
            labels = (labels > np.median(labels)).astype(float)
        return BaseData(X, labels, CovariateSource.table(X))
    dim = cov.get("dim", 5)
    source = CovariateSource.gaussian(dim)
    X = source.sample(spec.n_base, seeds.rng("base-covariates"))
    signal = synthetic_signal(X, q)
    rng = seeds.rng("base-labels")
    if binary:
        prob = 1.0 / (1.0 + np.exp(-(signal - 30.0)))
        labels = (rng.random(X.shape[0]) < prob).astype(float)
        return BaseData(X, labels, CovariateSource.table(X))
    return BaseData(X, signal + rng.standard_normal(X.shape[0]), source)


# ----------------------------------------------------------------------------
# per-template construction
# ----------------------------------------------------------------------------


@dataclass
class CellSetup:
    f_theta: object
    f_phi: object
    mechanism: OutcomeMechanism
    hclass: HypothesisClass
    metric: str = "rmse"
    beta: Optional[np.ndarray] = None


def _shuffle(seeds: SeedPlan, **kw) -> ShuffleSpec:
    return ShuffleSpec(seed=seeds.stream_seed("shuffle"), **kw)


def _gaussian_prediction_noise(scale):
    return NoiseSpec("gaussian", scale, "prediction") if scale > 0 else NoiseSpec("none", 0.0, "prediction")


def build_cell(spec: ExperimentSpec, value, base: BaseData, seeds: SeedPlan) -> tuple[CellSetup, dict]:
    """Predictors, mechanism and meta-model class for one cell."""
    t = spec.template
    params = {"alpha": spec.alpha, spec.sweep_parameter: value}
    alpha = params["alpha"]
    out_noise = NoiseSpec("gaussian", spec.option("outcome_noise")) if spec.option("outcome_noise") > 0 else NoiseSpec()
    linear = HypothesisClass("linear")

    if t == "appD-misspec":
        return _build_misspec(spec, params, base, seeds), params

    if t == "fig4a-width-sweep":
        m_theta = int(params["m_theta"])

        def train(label):
            return TrainConfig(optimizer=spec.option("optimizer"), epochs=int(spec.option("epochs")),
                               maxiter=int(spec.option("maxiter")), restarts=int(spec.option("restarts")),
                               init_seed=seeds.stream_seed(label))

        g1 = fit_neural_predictor(base.X, base.labels, spec.option("m_g"), train("g1-init"), id="g1")
        f_theta = fit_neural_predictor(base.X, base.labels, m_theta, train("f-theta-init"))
        f_phi = make_test_predictor(base.X, base.labels, _shuffle(seeds), id="f_phi")
        meta_cfg = train("meta-init")
        hclass = HypothesisClass("neural", m_units=spec.option("m_g"), train_config=meta_cfg)
        mech = OutcomeMechanism(g1, "linear", alpha, out_noise)
        return CellSetup(f_theta, f_phi, mech, hclass), params

    g1 = fit_linear_predictor(base.X, base.labels, id="g1")
    mech = OutcomeMechanism(g1, "linear", alpha, out_noise)
    if t in ("fig3c-overparam", "fig5a-trainsize-sweep"):
        degree = int(spec.option("degree"))
        f_theta = fit_overparam_predictor(base.X, base.labels, degree, id="f_theta")
        f_phi = make_test_predictor(base.X, base.labels, _shuffle(seeds), fit=fit_overparam_predictor,
                                    degree=degree, id="f_phi")
        return CellSetup(f_theta, f_phi, mech, linear, beta=g1.weights), params

    f_lin = fit_linear_predictor(base.X, base.labels, id="f_theta")
    f_phi = make_test_predictor(base.X, base.labels, _shuffle(seeds), id="f_phi")
    if t == "fig3a-noniden":
        f_theta = f_lin
    elif t in ("fig3b-random", "fig5b-trainsize-sweep"):
        f_theta = NoisyPredictor(f_lin, _gaussian_prediction_noise(spec.option("prediction_noise")))
    elif t == "fig4b-noise-sweep":
        f_theta = NoisyPredictor(f_lin, _gaussian_prediction_noise(params["noise_scale"]))
    elif t == "fig3d-discrete":
        f_theta = DiscretizedPredictor(f_lin, quantile_levels(f_lin, base.X, int(spec.option("levels"))))
    elif t == "fig5c-shift-sweep":
        f_theta = NoisyPredictor(f_lin, _gaussian_prediction_noise(spec.option("prediction_noise")))
        f_phi = interpolate(f_lin, f_phi, params["rho"], id="f_phi_rho")
    else:  # pragma: no cover - guarded by spec validation
        raise ConfigError(f"/template: unhandled template {t!r}")
    return CellSetup(f_theta, f_phi, mech, linear, beta=g1.weights), params


def _build_misspec(spec, params, base: BaseData, seeds: SeedPlan) -> CellSetup:
    p = params.get("p", spec.alpha)
    gamma = params.get("gamma", spec.option("gamma"))
    rounds = int(spec.option("rounds"))
    stumps = HypothesisClass("boosted-stumps", include_prediction=False, rounds=rounds)
    noisy = _shuffle(seeds, fraction=0.0, flip_gamma=gamma).apply(base.labels)
    clean_model = fit_arrays(base.X, base.labels, stumps)
    noisy_model = fit_arrays(base.X, noisy, stumps)
    clean = ModelPredictor(clean_model, threshold=0.5, id="stumps(clean)")
    flipped = ModelPredictor(noisy_model, threshold=0.5, id=f"stumps(gamma={gamma:g})")
    if spec.option("variant") == "reversed":
        f_theta, f_phi = flipped, clean
    else:
        f_theta, f_phi = clean, flipped
    g1 = TableLabelLookup(base.X, base.labels)
    mech = OutcomeMechanism(g1, "replace", p, NoiseSpec())
    return CellSetup(f_theta, f_phi, mech, HypothesisClass("logistic"), metric="accuracy")


# ----------------------------------------------------------------------------
# running
# ----------------------------------------------------------------------------


class ExperimentError(RuntimeError):
    def __init__(self, failures, partial=None):
        self.failures = failures
        self.partial = partial
        lines = [f"{f['template']} {f['parameter']}={f['sweep']!r} replicate {f['replicate']}: {f['error']}"
                 for f in failures]
        super().__init__(f"{len(failures)} experiment cell(s) failed:\n" + "\n".join(lines))


def run_cell(spec: ExperimentSpec, value_index: int, replicate: int) -> dict:
    """Run one (sweep value, replicate) cell; BLAS is pinned to one thread."""
    with threadpool_limits(limits=1):
        return _run_cell(spec, value_index, replicate)


def _run_cell(spec: ExperimentSpec, value_index: int, replicate: int) -> dict:
    value = spec.sweep_values[value_index]
    seeds = SeedPlan(spec.seed, replicate)
    base = base_data(spec, seeds, binary=spec.template == "appD-misspec")
    setup, params = build_cell(spec, value, base, seeds)
    n_train = int(params.get("n_train", spec.n_train))
    train = generate_dataset(base.source, setup.f_theta, setup.mechanism, n_train, seeds.child("train"))
    test = generate_dataset(base.source, setup.f_phi, setup.mechanism, spec.n_test, seeds.child("test"))
    held = generate_dataset(base.source, setup.f_phi, setup.mechanism, n_train, seeds.child("baseline"))
    with_m = fit_meta_model(train, setup.hclass)
    without_m = fit_meta_model(train, setup.hclass.without_prediction())
    base_m = fit_meta_model(held, setup.hclass)
    metrics = {
        "with-yhat": evaluate(with_m, test, setup.metric),
        "without-yhat": evaluate(without_m, test, setup.metric),
        "baseline": evaluate(base_m, test, setup.metric),
    }
    diag = {"coef_yhat": float(with_m.coef_yhat)} if setup.hclass.kind in ("linear", "neural") else {}
    if setup.hclass.kind == "linear":
        diag["coef_x"] = [float(c) for c in with_m.coef_x]
        diag["rank_deficient"] = bool(with_m.rank_deficient)
    if setup.beta is not None:
        diag["beta"] = [float(b) for b in setup.beta]
    if setup.metric == "rmse":
        d_sq, d_se = prediction_distance_sq(setup.f_theta, setup.f_phi, base.source, spec.n_test,
                                            seeds.rng("distance"))
        diag["d_sq"], diag["d_sq_se"] = d_sq, d_se
    return {"sweep": value, "replicate": replicate, "metrics": metrics, "diagnostics": diag}


def _cell_or_failure(args):
    spec, vi, r = args
    try:
        return run_cell(spec, vi, r)
    except Exception as exc:  # reported with cell context by run_experiment
        return {"sweep": spec.sweep_values[vi], "replicate": r, "error": f"{type(exc).__name__}: {exc}"}


@dataclass
class ResultRow:
    sweep: float
    condition: str
    mean: float
    stderr: float
    replicates: int
    values: list
    min: float
    max: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class ExperimentResult:
    spec: dict
    rows: list
    cells: list

    def row(self, sweep, condition) -> ResultRow:
        for r in self.rows:
            if r.sweep == sweep and r.condition == condition:
                return r
        raise KeyError((sweep, condition))

    def to_dict(self) -> dict:
        return {"spec": self.spec, "rows": [r.to_dict() for r in self.rows], "cells": self.cells}


def summarize(values) -> tuple[float, float]:
    """Mean and standard error (sample std over sqrt(count); 0 for one value)."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("no values")
    se = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
    return float(v.mean()), se


def aggregate(spec: ExperimentSpec, cells: list) -> ExperimentResult:
    cells = sorted(cells, key=lambda c: (spec.sweep_values.index(c["sweep"]), c["replicate"]))
    rows = []
    for value in spec.sweep_values:
        sub = [c for c in cells if c["sweep"] == value]
        for cond in CONDITIONS:
            vals = [c["metrics"][cond] for c in sub]
            mean, se = summarize(vals)
            rows.append(ResultRow(value, cond, mean, se, len(vals), vals, min(vals), max(vals)))
    return ExperimentResult(spec.to_dict(), rows, cells)


def run_experiment(spec: ExperimentSpec, jobs: int = 1,
                   on_cell: Optional[Callable[[dict], None]] = None) -> ExperimentResult:
    """Run every cell of ``spec`` and aggregate over replicates.

    ``on_cell`` is called once per finished cell in grid order.  Any failed
    cell raises :class:`ExperimentError` after the remaining cells finish.
    """
    if jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    tasks = [(spec, vi, r) for vi in range(len(spec.sweep_values)) for r in range(spec.replicates)]
    if jobs == 1:
        results = map(_cell_or_failure, tasks)
        cells = _collect(results, on_cell)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = _collect(pool.map(_cell_or_failure, tasks), on_cell)
    failures = [dict(c, template=spec.template, parameter=spec.sweep_parameter) for c in cells if "error" in c]
    good = [c for c in cells if "error" not in c]
    if failures:
        raise ExperimentError(failures, good)
    return aggregate(spec, good)


def _collect(results, on_cell):
    cells = []
    for c in results:
        cells.append(c)
        if on_cell is not None:
            on_cell(c)
    return cells


def run_misspec_experiment(spec: ExperimentSpec, jobs: int = 1, on_cell=None) -> ExperimentResult:
    if spec.template != "appD-misspec":
        raise ConfigError(f"/template: expected appD-misspec, got {spec.template!r}")
    return run_experiment(spec, jobs, on_cell)


# ----------------------------------------------------------------------------
# export
# ----------------------------------------------------------------------------

CSV_COLUMNS = ["sweep", "condition", "mean", "stderr", "replicates", "min", "max"]


def _fmt(x) -> str:
    return format(float(x), ".17g")


def result_csv(result: ExperimentResult) -> str:
    buf = _stdio.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in result.rows:
        writer.writerow([_fmt(r.sweep), r.condition, _fmt(r.mean), _fmt(r.stderr), r.replicates,
                         _fmt(r.min), _fmt(r.max)])
    return buf.getvalue()


def export_result(result: ExperimentResult, fmt: str, path) -> Path:
    """Write the result as CSV (summary rows) or JSON (rows, cells and spec)."""
    path = Path(path)
    try:
        if fmt == "csv":
            path.write_text(result_csv(result))
        elif fmt == "json":
            dump_json(result.to_dict(), path)
        else:
            raise ValueError(f"unknown export format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def load_result(path) -> ExperimentResult:
    d = json.loads(Path(path).read_text())
    return ExperimentResult(d["spec"], [ResultRow(**r) for r in d["rows"]], d["cells"])
