from __future__ import annotations

import json

import numpy as np
import pytest

from ridgeiv import ModelParams, SigmaSpec, generate, ols
from ridgeiv.cli import main
from ridgeiv.dgp import save_dataset_csv


@pytest.fixture()
def data_csv(tmp_path):
    params = ModelParams(beta=0.0, rho=0.6, n=60, k=40, f_stat=5.0,
                         sigma=SigmaSpec("ar1", 0.5), seed=3)
    path = tmp_path / "data.csv"
    save_dataset_csv(generate(params), path)
    return path


@pytest.fixture()
def wide_csv(tmp_path):
    params = ModelParams(beta=0.0, rho=0.6, n=40, k=50, f_stat=5.0,
                         sigma=SigmaSpec("isotropic"), seed=4)
    path = tmp_path / "wide.csv"
    save_dataset_csv(generate(params), path)
    return path


def config_doc(**kw):
    doc = {
        "params": {
            "beta": 0.0, "rho": 0.6, "n": 50, "k": 30, "f_stat": 5.0,
            "sigma": {"kind": "isotropic"},
        },
        "lambda_grid": [0.0, 0.5],
        "methods": ["tsls_ridge", "ols"],
        "replications": 3,
        "base_seed": 9,
        "figure_tag": "custom",
    }
    doc.update(kw)
    return doc


# --------------------------------------------------------------- simulate


def test_simulate_from_config(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(config_doc()))
    out = tmp_path / "results"
    assert main(["simulate", str(cfg), "--out", str(out), "--workers", "1"]) == 0
    assert (out / "custom_0.6.csv").exists()
    assert (out / "custom_0.6_replications.csv").exists()


def test_simulate_builtin_figure_with_override(tmp_path):
    out = tmp_path / "results"
    code = main(["simulate", "--figure", "fig1", "--reps", "2",
                 "--out", str(out), "--workers", "1"])
    assert code == 0
    assert (out / "fig1_0.75.csv").exists()
    assert (out / "fig1_1.25.csv").exists()
    assert (out / "fig1_0.75_replications.csv").exists()


def test_simulate_malformed_json_exit_2(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"params": {,}')
    assert main(["simulate", str(cfg), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "line" in err and "column" in err


def test_simulate_unknown_key_exit_2(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(config_doc(extra_key=1)))
    assert main(["simulate", str(cfg), "--out", str(tmp_path)]) == 2
    assert "unknown keys" in capsys.readouterr().err


def test_simulate_requires_one_source(tmp_path, capsys):
    assert main(["simulate", "--out", str(tmp_path)]) == 2
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(config_doc()))
    assert main(["simulate", str(cfg), "--figure", "fig1", "--out", str(tmp_path)]) == 2


def test_simulate_unknown_figure(tmp_path, capsys):
    assert main(["simulate", "--figure", "fig9", "--out", str(tmp_path)]) == 2
    assert "unknown figure tag" in capsys.readouterr().err


# ----------------------------------------------------------------- theory


def test_theory_signal_curve_stdout(capsys):
    code = main(["theory", "--kind", "signal_f", "--gamma", "0.75",
                 "--sigma", "isotropic", "--grid", "0:2:50"])
    assert code == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "kind,gamma,sigma,lambda,value"
    assert len(lines) == 51
    first = float(lines[1].split(",")[-1])
    assert first == pytest.approx(0.25)


def test_theory_bias_ar1_ridgeless_matches_ols(capsys):
    code = main(["theory", "--kind", "bias", "--gamma", "1.25",
                 "--sigma", "ar1:0.5", "--grid", "0:2:5"])
    assert code == 0
    lines = capsys.readouterr().out.strip().splitlines()
    val0 = float(lines[1].split(",")[-1])
    assert val0 == pytest.approx(0.6 / 7.25, abs=1e-9)


def test_theory_unknown_kind_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["theory", "--kind", "nope", "--gamma", "0.75"])
    assert exc.value.code == 2


def test_theory_writes_file(tmp_path):
    out = tmp_path / "curve.csv"
    code = main(["theory", "--kind", "amplifier", "--gamma", "0.75",
                 "--grid", "0:1:3", "--out", str(out)])
    assert code == 0
    assert out.read_text().startswith("kind,gamma,sigma,lambda,value")


# --------------------------------------------------------------- estimate


def test_estimate_ols_matches_library(data_csv, capsys):
    assert main(["estimate", str(data_csv), "--method", "ols"]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert out[0] == "method,lambda,beta_hat,se_hat,signal,v_hat,f_hat_stat"
    fields = out[1].split(",")
    params = ModelParams(beta=0.0, rho=0.6, n=60, k=40, f_stat=5.0,
                         sigma=SigmaSpec("ar1", 0.5), seed=3)
    expected = ols(generate(params)).beta_hat
    assert float(fields[2]) == pytest.approx(expected, rel=1e-12)
    assert fields[3] == ""  # no variance for the plain benchmark


def test_estimate_ba_with_cv(data_csv, capsys):
    code = main(["estimate", str(data_csv), "--method", "ba-tsls",
                 "--lambda", "cv", "--grid", "0.01:5:12"])
    assert code == 0
    fields = capsys.readouterr().out.strip().splitlines()[1].split(",")
    assert fields[0] == "ba_tsls_ridge"
    lam_star = float(fields[1])
    assert 0.01 <= lam_star <= 5.0
    assert fields[3] != ""  # adjusted estimator reports a standard error


def test_estimate_nagar_rejects_wide_design(wide_csv, capsys):
    assert main(["estimate", str(wide_csv), "--method", "nagar"]) == 1
    assert "gamma >= 1" in capsys.readouterr().err


def test_estimate_tsls_lambda(data_csv, capsys):
    assert main(["estimate", str(data_csv), "--method", "tsls",
                 "--lambda", "0.5"]) == 0
    fields = capsys.readouterr().out.strip().splitlines()[1].split(",")
    assert fields[0] == "tsls_ridge"
    assert float(fields[1]) == 0.5
    assert fields[5] != ""  # v_hat diagnostic present


def test_estimate_bad_lambda(data_csv, capsys):
    assert main(["estimate", str(data_csv), "--method", "tsls",
                 "--lambda", "abc"]) == 2
    assert main(["estimate", str(data_csv), "--method", "ols",
                 "--lambda", "cv"]) == 2


def test_estimate_missing_file(tmp_path, capsys):
    assert main(["estimate", str(tmp_path / "nope.csv"), "--method", "ols"]) == 1


def test_workers_env_cap(tmp_path, monkeypatch):
    monkeypatch.setenv("RMT_IV_THREADS", "1")
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(config_doc()))
    assert main(["simulate", str(cfg), "--out", str(tmp_path / "o"),
                 "--workers", "4"]) == 0
