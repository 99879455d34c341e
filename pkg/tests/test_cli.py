import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from erw.cli import main
from erw.sequences import drift_constant


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def run(tmp_path, *args):
    out = tmp_path / "out"
    rc = main([*args, "--out", str(out)])
    return rc, out


def test_moments_simple_walk(tmp_path):
    rc, out = run(tmp_path, "moments", "--alpha", "0", "--n", "500", "--every")
    assert rc == 0
    rows = read_csv(out / "moments.csv")
    assert len(rows) == 500
    assert all(float(r["var"]) == float(r["n"]) for r in rows)
    assert list(rows[0]) == ["n", "a_n", "mean", "var", "step_var", "mean_ratio", "mean_limit", "var_ratio", "var_limit"]


def test_moments_prediction_columns(tmp_path):
    rc, out = run(tmp_path, "moments", "--alpha", "0.2", "--n", "1e6")
    last = read_csv(out / "moments.csv")[-1]
    assert float(last["var_ratio"]) == pytest.approx(1 / 0.6, rel=1e-3)
    assert float(last["var_limit"]) == pytest.approx(1 / 0.6)
    rc, out = run(tmp_path, "moments", "--alpha", "0.5", "--gamma", "0.5", "--n", "1e6")
    last = read_csv(out / "moments.csv")[-1]
    assert float(last["mean_ratio"]) == pytest.approx(0.5, rel=0.02)
    meta = json.loads((out / "predictions.json").read_text())
    assert meta["regime"]["regime"] == "ii-b"


def test_config_echo_and_replay(tmp_path):
    rc, out = run(tmp_path, "simulate", "--alpha", "0.7", "--gamma", "0.4", "--n", "5000", "--seed", "42", "--every")
    assert rc == 0
    cfg = json.loads((out / "config.json").read_text())
    assert cfg["alpha"] == 0.7 and cfg["seed"] == 42 and cfg["command"] == "simulate"
    out2 = tmp_path / "replay"
    assert main(["simulate", "--config", str(out / "config.json"), "--out", str(out2)]) == 0
    assert (out / "trajectory.csv").read_bytes() == (out2 / "trajectory.csv").read_bytes()
    # explicit flags win over the file
    out3 = tmp_path / "override"
    assert main(["simulate", "--config", str(out / "config.json"), "--seed", "43", "--out", str(out3)]) == 0
    assert json.loads((out3 / "config.json").read_text())["seed"] == 43
    assert (out / "trajectory.csv").read_bytes() != (out3 / "trajectory.csv").read_bytes()


def test_simulate_full_memory(tmp_path):
    rc, out = run(tmp_path, "simulate", "--alpha", "1", "--beta", "1", "--n", "300", "--every")
    rows = read_csv(out / "trajectory.csv")
    assert all(int(r["S_n"]) == int(r["n"]) for r in rows)


def test_bad_config(tmp_path):
    bad = tmp_path / "c.json"
    bad.write_text('{"alpha": 0.2, "nonsense": 1}')
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    bad.write_text("{not json")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2


@pytest.mark.parametrize(
    "argv",
    [
        ["simulate", "--n", "10"],
        ["simulate", "--alpha", "0.2", "--eps", "0.1", "--gamma", "0.3"],
        ["simulate", "--alpha", "1.5"],
        ["simulate", "--alpha", "0.2", "--n", "2.5"],
        ["moments", "--alpha", "0.2", "--eps", "3"],
        ["phase-scan", "--grid-alpha", "1.2"],
        ["phase-scan", "--grid-gamma", "0,0.5"],
        ["phase-scan", "--grid-alpha", "a:b"],
        ["verify", "--suite", "exact", "--alpha", "0.3"],
        ["verify", "--suite", "critical", "--alpha", "0.3"],
        ["verify", "--suite", "nope"],
        ["fluctuation", "--alpha", "0.5"],
        ["fluctuation", "--alpha", "1.0"],
        [],
    ],
)
def test_usage_errors(tmp_path, argv):
    assert main([*argv, "--out", str(tmp_path / "o")] if argv else []) == 2


def test_oracle_check(tmp_path, capsys):
    rc, out = run(tmp_path, "oracle-check")
    assert rc == 0
    rep = json.loads((out / "oracle.json").read_text())
    assert rep["passed"] and rep["cells"] == 27
    assert max(rep["max_abs_mean"], rep["max_abs_second"]) < 1e-10


def test_phase_scan_cells(tmp_path):
    rc, out = run(tmp_path, "phase-scan", "--grid-alpha", "0.25,0.4,0.75", "--grid-gamma", "0.3,0.5,0.8", "--n", "1e5")
    assert rc == 0
    rows = {(float(r["alpha"]), float(r["gamma"])): r for r in read_csv(out / "phase_scan.csv")}
    assert len(rows) == 9
    r = rows[(0.4, 0.3)]
    assert r["regime"] == "i-a" and float(r["predicted_mean"]) == pytest.approx(2.0)
    r = rows[(0.25, 0.5)]
    assert r["regime"] == "ii-a"
    assert float(r["predicted_mean"]) == pytest.approx(3.0) and float(r["predicted_second"]) == pytest.approx(2.0)
    r = rows[(0.75, 0.8)]
    assert r["regime"] == "iii-c"
    assert float(r["predicted_mean"]) == pytest.approx(drift_constant(0.75, 0.0, 0.8))
    for r in rows.values():
        assert float(r["mean_deviation"]) == pytest.approx(abs(float(r["measured_mean"]) - float(r["predicted_mean"])))


def test_phase_scan_range_grid(tmp_path):
    rc, out = run(tmp_path, "phase-scan", "--grid-alpha", "0.1:0.3:0.1", "--grid-gamma", "0.6", "--n", "1000")
    assert [float(r["alpha"]) for r in read_csv(out / "phase_scan.csv")] == [0.1, 0.2, 0.3]


def test_verify_exit_codes(tmp_path, capsys):
    rc, out = run(tmp_path, "verify", "--suite", "exact")
    assert rc == 0
    v = json.loads((out / "verdict.json").read_text())
    assert v["passed"] and v["suites"][0]["suite"] == "exact"
    assert "exact: PASS" in capsys.readouterr().out
    rc, out = run(tmp_path, "verify", "--suite", "exact", "--tolerance-scale", "1e-9")
    assert rc == 1
    assert not json.loads((out / "verdict.json").read_text())["passed"]


def test_verify_suite_overrides(tmp_path):
    rc, out = run(
        tmp_path, "verify", "--suite", "diffusive", "--alpha", "0.2", "--n", "2000", "--m", "5000", "--seed", "3",
        "--tolerance-scale", "2",
    )
    suite = json.loads((out / "verdict.json").read_text())["suites"][0]
    assert suite["config"]["n"] == 2000 and suite["config"]["m"] == 5000
    assert rc == 0


def test_ensemble_csv(tmp_path):
    rc, out = run(tmp_path, "ensemble", "--alpha", "0.3", "--n", "1000", "--m", "200", "--seed", "1", "--workers", "2")
    rows = read_csv(out / "ensemble.csv")
    assert list(rows[0]) == ["n", "count", "mean", "var", "skew", "kurt", "se_mean"]
    assert rows[-1]["n"] == "1000" and all(r["count"] == "200" for r in rows)


@pytest.mark.parametrize("fmt", ["csv", "bin"])
def test_fluctuation_outputs(tmp_path, fmt):
    rc, out = run(tmp_path, "fluctuation", "--alpha", "0.75", "--n", "100", "--m", "300", "--samples-format", fmt)
    assert rc == 0
    summary = json.loads((out / "fluctuation.json").read_text())
    assert summary["N"] == 2000 and summary["normality"]["m"] == 300
    if fmt == "bin":
        t = np.fromfile(out / "t_values.f64", dtype="<f8")
    else:
        t = np.array([float(r["t"]) for r in read_csv(out / "t_values.csv")])
    assert t.shape == (300,) and np.all(np.isfinite(t))


def test_lil_csv(tmp_path):
    rc, out = run(tmp_path, "lil", "--alpha", "0", "--n", "1e5", "--seeds", "2")
    rows = read_csv(out / "lil.csv")
    assert {r["seed"] for r in rows} == {"1", "2"}
    assert all(np.isfinite(float(r["max_plus"])) for r in rows)


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "erw", "oracle-check", "--out", str(tmp_path / "o")],
        capture_output=True,
        text=True,
        env={"ERW_WORKERS": "2", "PATH": ""},
    )
    assert proc.returncode == 0, proc.stderr
