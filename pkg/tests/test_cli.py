import json

import numpy as np
import pytest

from perflab.cli import main
from perflab.io import ConfigError, load_covariates, read_json


def test_load_covariates_shapes(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("a,b\n1,2\n3,4\n")
    t = load_covariates(p)
    assert (t.n, t.d) == (2, 2)
    p.write_text("a,y,b\n1,0,2\n3,1,4\n5,0,6\n")
    t = load_covariates(p, "y")
    assert t.d == 2 and t.columns == ["a", "b"] and t.labels.tolist() == [0.0, 1.0, 0.0]


def test_nan_cell_names_row_and_column(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("a,b\n1,2\n3,nan\n")
    with pytest.raises(ConfigError, match=r"row 2.*'b'"):
        load_covariates(p)


def test_bad_json_reports_position(tmp_path):
    p = tmp_path / "s.json"
    p.write_text('{"template": }')
    with pytest.raises(ConfigError, match="line 1"):
        read_json(p)


def _spec(tmp_path, **kw):
    d = {"template": "fig3b-random", "replicates": 2, "n_train": 1_000, "n_test": 500, "n_base": 200}
    d.update(kw)
    p = tmp_path / "spec.json"
    p.write_text(json.dumps(d))
    return p


def test_missing_spec_exit_2(tmp_path, capsys):
    missing = tmp_path / "none.json"
    assert main(["experiment", "--spec", str(missing)]) == 2
    assert str(missing) in capsys.readouterr().err


def test_bad_spec_exit_2(tmp_path):
    assert main(["experiment", "--spec", str(_spec(tmp_path, n_train="many")), "--out", str(tmp_path)]) == 2


def test_unknown_command_exit_2(tmp_path):
    assert main(["launch", "--spec", str(_spec(tmp_path))]) == 2


def test_experiment_fifteen_rows_and_repeatable(tmp_path, capsys):
    spec = _spec(tmp_path)
    outs = []
    for k in range(2):
        out = tmp_path / f"o{k}"
        assert main(["experiment", "--spec", str(spec), "--out", str(out), "--seed", "7"]) == 0
        outs.append({p.name: p.read_bytes() for p in out.iterdir()})
    assert outs[0] == outs[1]
    csv = outs[0]["fig3b-random__seed7.csv"].decode().splitlines()
    assert len(csv) == 1 + 15
    printed = [line for line in capsys.readouterr().out.splitlines() if "rep=" in line]
    assert len(printed) == 2 * 5 * 2


def test_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("PERFLAB_SEED", "3")
    assert main(["experiment", "--spec", str(_spec(tmp_path, sweep={"values": [0.5]})), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "fig3b-random__seed3.csv").exists()


def test_generate_fit_audit_interference(tmp_path):
    gen = tmp_path / "gen.json"
    gen.write_text(json.dumps({
        "covariates": {"kind": "synthetic", "dim": 2}, "n": 500,
        "predictor": {"kind": "composed", "base": {"kind": "linear", "weights": [1.0, 0.0]},
                      "wrapper": {"noise": {"family": "gaussian", "scale": 1.0}}},
        "mechanism": {"base": {"kind": "linear", "weights": [1.0, -1.0], "intercept": 0.0},
                      "strength": 0.5, "noise": {"family": "gaussian", "scale": 0.1}},
    }))
    assert main(["generate", "--spec", str(gen), "--out", str(tmp_path), "--seed", "1"]) == 0
    data = tmp_path / "generate__seed1.csv"
    assert data.exists()

    fit = tmp_path / "fit.json"
    fit.write_text(json.dumps({"data": str(data), "class": {"kind": "linear"}}))
    assert main(["fit", "--spec", str(fit), "--out", str(tmp_path), "--seed", "1"]) == 0
    model = json.loads((tmp_path / "fit__seed1.json").read_text())["model"]
    assert abs(np.asarray(model["params"]["weights"])[-1] - 0.5) < 0.05

    audit = tmp_path / "audit.json"
    audit.write_text(json.dumps({
        "covariates": {"kind": "synthetic", "dim": 2},
        "train_predictor": {"kind": "linear", "weights": [1.0, 2.0], "intercept": 0.0},
        "target_predictor": {"kind": "linear", "weights": [1.0, 2.0], "intercept": 1.0},
    }))
    assert main(["audit", "--spec", str(audit), "--out", str(tmp_path), "--seed", "1"]) == 0
    report = json.loads((tmp_path / "audit__seed1.json").read_text())
    assert report["overlap"]["passed"] is False and report["overparam"]["passed"] is False

    inter = tmp_path / "inter.json"
    inter.write_text(json.dumps({
        "covariates": {"kind": "synthetic", "dim": 2}, "n": 300, "alpha": 1.0, "beta_spill": 0.5,
        "predictor": {"kind": "polynomial", "degree": 2, "weights": [0.3, 1.0, 0.5, -0.2, 0.4],
                      "intercept": 0.0, "input_dim": 2},
        "g1": {"kind": "linear", "weights": [1.0, -1.0], "intercept": 0.0},
    }))
    assert main(["interference", "--spec", str(inter), "--out", str(tmp_path), "--seed", "1"]) == 0
    rec = json.loads((tmp_path / "interference__seed1.json").read_text())
    assert rec["delta"] == 0.0
    assert rec["comparison"]["coef_yhat_without_G"] == pytest.approx(1.5, abs=1e-8)
