"""Command-line entry point: ``perflab <command> --spec FILE [--out DIR] [--seed K] [--jobs J]``.

Commands
  generate      sample a dataset from the outcome mechanism under a predictor
  fit           fit a meta-model to a dataset CSV
  audit         run the identifiability auditors for a training predictor
  experiment    run an experiment grid and write result tables
  interference  simulate linear-in-means outcomes and compare fits

Exit status is 0 on success, 1 when a computation or experiment cell
fails, and 2 for configuration errors.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import identify
from .estimators import HypothesisClass, fit_meta_model
from .experiments import ExperimentError, ExperimentSpec, export_result, run_experiment
from .interference import (LinearInMeansConfig, build_homophilous_network, fit_and_compare_interference,
                           measure_homophily_delta, simulate_linear_in_means)
from .io import ConfigError, dump_json, load_covariates, read_json
from .predictors import predictor_from_dict
from .rng import SeedPlan
from .scm import CovariateSource, Dataset, NoiseSpec, OutcomeMechanism, generate_dataset

COMMANDS = ("generate", "fit", "audit", "experiment", "interference")


def _resolve_seed(cli_seed: Optional[int], spec: dict) -> int:
    if cli_seed is not None:
        return cli_seed
    env = os.environ.get("PERFLAB_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"PERFLAB_SEED must be an integer, got {env!r}") from None
    seed = spec.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("/seed: expected a non-negative integer")
    return seed


def _source(spec: dict, pointer: str = "/covariates") -> CovariateSource:
    cov = spec.get("covariates", {"kind": "synthetic", "dim": 5})
    kind = cov.get("kind") if isinstance(cov, dict) else None
    if kind == "synthetic":
        dim = cov.get("dim", 5)
        if not isinstance(dim, int) or dim < 1:
            raise ConfigError(f"{pointer}/dim: expected a positive integer")
        return CovariateSource.gaussian(dim)
    if kind == "csv":
        return CovariateSource.table(load_covariates(cov["path"], cov.get("label_column")).values)
    raise ConfigError(f"{pointer}/kind: expected 'synthetic' or 'csv'")


def _predictor(d, pointer):
    if not isinstance(d, dict):
        raise ConfigError(f"{pointer}: expected a predictor object")
    try:
        return predictor_from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{pointer}: invalid predictor ({exc})") from None


def _noise(d, pointer, applies_to="outcome") -> NoiseSpec:
    if d is None:
        return NoiseSpec("none", 0.0, applies_to)
    try:
        return NoiseSpec(d.get("family", "gaussian"), float(d.get("scale", 1.0)), applies_to)
    except (AttributeError, ValueError) as exc:
        raise ConfigError(f"{pointer}: invalid noise ({exc})") from None


def _mechanism(d: dict) -> OutcomeMechanism:
    if not isinstance(d, dict):
        raise ConfigError("/mechanism: expected an object")
    base = _predictor(d.get("base"), "/mechanism/base")
    try:
        return OutcomeMechanism(base, d.get("performativity", "linear"), float(d.get("strength", 0.0)),
                                _noise(d.get("noise"), "/mechanism/noise"))
    except ValueError as exc:
        raise ConfigError(f"/mechanism: {exc}") from None


def _out_name(out: Path, stem: str, seed: int, suffix: str) -> Path:
    return out / f"{stem}__seed{seed}{suffix}"


# ----------------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------------


def cmd_generate(spec: dict, seed: int, out: Path, jobs: int) -> int:
    source = _source(spec)
    predictor = _predictor(spec.get("predictor"), "/predictor")
    mech = _mechanism(spec.get("mechanism"))
    n = spec.get("n", 1000)
    if not isinstance(n, int) or n < 1:
        raise ConfigError("/n: expected a positive integer")
    data = generate_dataset(source, predictor, mech, n, SeedPlan(seed))
    data.provenance["spec"] = spec
    path = _out_name(out, "generate", seed, ".csv")
    data.to_csv(path)
    print(f"generate: wrote {n} rows to {path}")
    return 0


def cmd_fit(spec: dict, seed: int, out: Path, jobs: int) -> int:
    if not isinstance(spec.get("data"), str):
        raise ConfigError("/data: expected a dataset CSV path")
    path = Path(spec["data"])
    if not path.exists():
        raise ConfigError(f"/data: file not found: {path}")
    try:
        hclass = HypothesisClass.from_dict(spec.get("class", {"kind": "linear"}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"/class: {exc}") from None
    data = Dataset.from_csv(path)
    model = fit_meta_model(data, hclass)
    record = {"spec": spec, "master_seed": seed, "model": model.to_dict()}
    target = _out_name(out, "fit", seed, ".json")
    dump_json(record, target)
    coef = f" coef_yhat={model.coef_yhat:.6g}" if hclass.include_prediction and hclass.kind in ("linear", "neural") else ""
    print(f"fit: {hclass.kind} on {data.n} rows{coef} -> {target}")
    return 0


def _basis(d, dim):
    if d in (None, "linear"):
        return identify.linear_basis(dim)
    if isinstance(d, dict) and "polynomial" in d:
        return identify.polynomial_basis(dim, int(d["polynomial"]))
    raise ConfigError("/basis: expected 'linear' or {'polynomial': degree}")


def cmd_audit(spec: dict, seed: int, out: Path, jobs: int) -> int:
    source = _source(spec)
    f_train = _predictor(spec.get("train_predictor"), "/train_predictor")
    checks = spec.get("checks", ["overlap", "overparam", "discrete"])
    n_sample = spec.get("n_sample", 1000)
    report = {"spec": spec, "master_seed": seed}
    plan = SeedPlan(seed)
    if "overlap" in checks:
        f_target = _predictor(spec.get("target_predictor"), "/target_predictor")
        cfg = identify.OverlapConfig(seed=plan.stream_seed("overlap"))
        report["overlap"] = identify.check_output_overlap(f_train, f_target, source, n_sample, cfg).to_dict()
    if "overparam" in checks:
        basis = _basis(spec.get("basis"), source.dim)
        report["overparam"] = identify.check_overparameterized(
            f_train, basis, source, n_sample, spec.get("threshold", 0.01), plan.stream_seed("overparam")).to_dict()
    if "discrete" in checks:
        report["discrete"] = identify.check_discrete(f_train, source, n_sample, plan.stream_seed("discrete")).to_dict()
    target = _out_name(out, "audit", seed, ".json")
    dump_json(report, target)
    verdicts = " ".join(f"{k}={'pass' if report[k]['passed'] else 'fail'}"
                        for k in ("overlap", "overparam", "discrete") if k in report)
    print(f"audit: {verdicts} -> {target}")
    return 0


def cmd_experiment(spec: dict, seed: int, out: Path, jobs: int) -> int:
    exp = ExperimentSpec.from_dict(spec, seed=seed)

    def report(cell):
        if "error" in cell:
            print(f"{exp.template} {exp.sweep_parameter}={cell['sweep']!r} rep={cell['replicate']} FAILED: {cell['error']}")
        else:
            m = " ".join(f"{k}={v:.6g}" for k, v in cell["metrics"].items())
            print(f"{exp.template} {exp.sweep_parameter}={cell['sweep']!r} rep={cell['replicate']} {m}")

    try:
        result = run_experiment(exp, jobs=jobs, on_cell=report)
    except ExperimentError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    stem = exp.template
    export_result(result, "csv", _out_name(out, stem, exp.seed, ".csv"))
    export_result(result, "json", _out_name(out, stem, exp.seed, ".json"))
    print(f"experiment: {len(result.rows)} rows -> {_out_name(out, stem, exp.seed, '.csv')}")
    return 0


def cmd_interference(spec: dict, seed: int, out: Path, jobs: int) -> int:
    source = _source(spec)
    plan = SeedPlan(seed)
    n = spec.get("n", 10_000)
    if not isinstance(n, int) or n < 2:
        raise ConfigError("/n: expected an integer >= 2")
    net_spec = spec.get("network", {"method": "clone-groups", "group_size": 3})
    predictor = _predictor(spec.get("predictor"), "/predictor")
    g1 = _predictor(spec.get("g1"), "/g1")
    X = source.sample(n, plan.rng("network-covariates"))
    try:
        network = build_homophilous_network(X, net_spec.get("method", "knn"), k=net_spec.get("k", 10),
                                            group_size=net_spec.get("group_size", 3), seed=seed)
    except ValueError as exc:
        raise ConfigError(f"/network: {exc}") from None
    cfg = LinearInMeansConfig(float(spec.get("alpha", 1.0)), float(spec.get("beta_spill", 0.5)), g1,
                              _noise(spec.get("noise"), "/noise"))
    data = simulate_linear_in_means(network, predictor, cfg, plan)
    comparison = fit_and_compare_interference(data)
    delta = measure_homophily_delta(network, data.predictions)
    data.provenance["spec"] = spec
    data.to_csv(_out_name(out, "interference", seed, ".csv"))
    record = {"spec": spec, "master_seed": seed, "delta": delta, "comparison": comparison.to_dict()}
    dump_json(record, _out_name(out, "interference", seed, ".json"))
    print(f"interference: n={network.n} delta={delta:.3g} coef_yhat={comparison.coef_yhat_without_G:.6g}")
    return 0


HANDLERS = {
    "generate": cmd_generate,
    "fit": cmd_fit,
    "audit": cmd_audit,
    "experiment": cmd_experiment,
    "interference": cmd_interference,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="perflab", description="Performative prediction laboratory.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--spec", required=True, help="JSON spec file")
    parser.add_argument("--out", default=".", help="output directory (created if missing)")
    parser.add_argument("--seed", type=int, default=None, help="master seed (falls back to PERFLAB_SEED)")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes for experiment cells")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        spec = read_json(args.spec)
        if not isinstance(spec, dict):
            raise ConfigError("/: spec must be a JSON object")
        seed = _resolve_seed(args.seed, spec)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return HANDLERS[args.command](spec, seed, out, args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, FloatingPointError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
