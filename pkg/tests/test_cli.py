import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from lassorisk import cli
from lassorisk.experiments import deserialize_report


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_generate_then_fit_lasso(tmp_path, capsys):
    d = tmp_path / "inst"
    code, out, _ = run(capsys, "generate", "--kind", "collinear", "--n", 40, "--p", 10, "--s", 2,
                       "--seed", 4, "--noise", "--out-dir", d)
    assert code == 0
    meta = json.loads((d / "meta.json").read_text())
    assert meta["support"] == "1,2" and "y.csv" in meta["files"]
    code, out, _ = run(capsys, "fit-lasso", "--x", d / "X.csv", "--y", d / "y.csv",
                       "--lambda", 0.2, "--beta-star", d / "beta.csv")
    assert code == 0
    res = json.loads(out)
    assert res["kkt_inf_norm"] <= 0.2 + 1e-8 and res["max_active_violation"] <= 1e-8
    assert "loss" in res
    assert len(res["coefficients"]) == 10


def test_fit_lasso_orthogonal(tmp_path, capsys):
    np.savetxt(tmp_path / "X.csv", 2.0 * np.eye(4), delimiter=",")
    np.savetxt(tmp_path / "y.csv", [4.0, -2.0, 1.0, 0.0], delimiter=",")
    out_file = tmp_path / "fit.json"
    code, _, _ = run(capsys, "fit-lasso", "--x", tmp_path / "X.csv", "--y", tmp_path / "y.csv",
                     "--lambda", 0.5, "--out", out_file)
    assert code == 0
    res = json.loads(out_file.read_text())
    assert_allclose(res["coefficients"], [1.5, -0.5, 0, 0], atol=1e-12)
    assert res["support"] == "1,2"


def test_fit_tv(tmp_path, capsys):
    np.savetxt(tmp_path / "y.csv", [1.0, 1.0])
    code, out, err = run(capsys, "fit-tv", "--y", tmp_path / "y.csv", "--lambda", 0.5)
    assert code == 0
    assert_allclose(np.array(out.split(), dtype=float), [0.75, 0.75], atol=1e-10)
    assert json.loads(err)["method"] == "direct"
    code, _, _ = run(capsys, "fit-tv", "--y", tmp_path / "y.csv", "--lambda", 0.5, "--method", "lasso",
                     "--out", tmp_path / "f.csv", "--diagnostics", tmp_path / "d.json")
    assert code == 0
    assert_allclose(np.loadtxt(tmp_path / "f.csv"), [0.75, 0.75], atol=1e-8)
    assert json.loads((tmp_path / "d.json").read_text())["jumps"] == "1"


def test_compat(tmp_path, capsys):
    n = 6
    np.savetxt(tmp_path / "X.csv", math.sqrt(n) * np.eye(n)[:, :3], delimiter=",")
    code, out, _ = run(capsys, "compat", "--x", tmp_path / "X.csv", "--t", "1,2", "--eps", 1e-3, "--witness")
    assert code == 0
    cert = json.loads(out)
    assert cert["kappa_lower"] <= 1.0 + 1e-9 <= cert["kappa_upper"] + 2e-3
    assert cert["T"] == "1,2" and "witness" in cert
    code, _, err = run(capsys, "compat", "--x", tmp_path / "X.csv", "--t", "1,9")
    assert code == 1 and "error" in err


def test_bound(capsys):
    code, out, _ = run(capsys, "bound", "--id", "THM1_PROJ", "--inputs", "lam=0.1,s=4,nu=0.5")
    assert code == 0 and json.loads(out)["value"] == pytest.approx(0.16)
    code, out, _ = run(capsys, "bound", "--list")
    assert "RISKTV1" in json.loads(out)
    code, _, err = run(capsys, "bound", "--id", "NOPE")
    assert code == 1
    code, _, err = run(capsys, "bound", "--id", "EQ2_5", "--inputs", "lam=0.1")
    assert code == 1 and "error" in err


def test_tune(tmp_path, capsys):
    code, out, _ = run(capsys, "tune", "--rule", "universal", "--p", 100, "--n", 400)
    assert json.loads(out)["lambda"] == pytest.approx(0.389895, abs=1e-6)
    code, out, _ = run(capsys, "tune", "--rule", "monotone", "--tv", 1, "--n", 1000, "--delta", 0.1)
    assert json.loads(out)["k"] == 21
    code, out, _ = run(capsys, "tune", "--rule", "holder", "--L", 1, "--alpha", 1, "--n", 1000, "--delta", 0.1)
    assert json.loads(out)["k"] == 5
    code, out, _ = run(capsys, "tune", "--rule", "correlated", "--rho", 0.25, "--p", 100, "--n", 400)
    assert json.loads(out)["lambda"] == pytest.approx(0.097474, abs=1e-6)
    code, _, err = run(capsys, "tune", "--rule", "correlated", "--rho", 0, "--p", 100, "--n", 400)
    assert code == 1
    code, _, err = run(capsys, "tune", "--rule", "holder", "--n", 100)
    assert code == 1 and "--L" in err
    x = np.ones((5, 1)) * np.array([[1.0, 1.0, 1.0, -1.0]])
    np.savetxt(tmp_path / "X.csv", x, delimiter=",")
    code, out, _ = run(capsys, "tune", "--rule", "cluster", "--x", tmp_path / "X.csv", "--partition", "1,2,3;4")
    assert code == 0


def test_generate_kinds(tmp_path, capsys):
    for kind, extra in (("example1", []), ("gaussian", ["--p", 5]),
                        ("tv", ["--jumps", "4,7", "--levels", "0,1,2"]), ("tv", ["--signal", "holder"])):
        d = tmp_path / f"{kind}{len(extra)}"
        code, _, _ = run(capsys, "generate", "--kind", kind, "--n", 10, "--out-dir", d, *extra)
        assert code == 0
        X = np.loadtxt(d / "X.csv", delimiter=",", ndmin=2)
        assert X.shape[0] == 10
    beta = np.loadtxt(tmp_path / "tv4" / "beta.csv")
    assert_allclose(beta[[3, 6]], [1, 1])


def _config(tmp_path, **kw):
    cfg = dict(scenario_id="TV_HOLDER", trials=6, n=64, seed=1) | kw
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return p


def test_simulate_round_trip(tmp_path, capsys):
    cfg = _config(tmp_path)
    code, out, _ = run(capsys, "simulate", "--config", cfg, "--trials", 4, "--out", tmp_path / "r.json",
                       "--csv", tmp_path / "r.csv", "--assert")
    assert code == 0
    summary = json.loads(out)
    assert summary["trials"] == 4
    rep = deserialize_report((tmp_path / "r.json").read_bytes())
    assert len(rep.records) == 4
    assert (tmp_path / "r.csv").read_text().count("\n") == 5
    code, out2, _ = run(capsys, "simulate", "--report", tmp_path / "r.json")
    assert code == 0 and json.loads(out2)["empirical_coverage"] == summary["empirical_coverage"]


def test_simulate_assert_exit_code(tmp_path, capsys):
    cfg = _config(tmp_path)
    code, _, err = run(capsys, "simulate", "--config", cfg, "--assert", "--min-coverage", 1.5)
    assert code == 2 and "coverage assertion failed" in err


def test_simulate_bad_config(tmp_path, capsys):
    code, _, err = run(capsys, "simulate", "--config", _config(tmp_path, scenario_id="NOPE"))
    assert code == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    code, _, _ = run(capsys, "simulate", "--report", bad)
    assert code == 1
    code, _, _ = run(capsys, "simulate", "--config", tmp_path / "missing.json")
    assert code == 1
