import json
import math
import subprocess
import sys

import pytest

from ifront.cli import RunPlan, UsageError, execute, main, parse, read_config

FRONT_KEYS = ["d", "r", "c", "alpha1", "bracket_width", "speed_residual",
              "tail_gamma_fit", "tail_lambda_fit", "tail_mu_fit",
              "tail_ratio_fit", "center_manifold_residual"]


def test_parse_front_example():
    plan = parse(["front", "--d", "2", "--r", "1", "--c", "0.5",
                  "--out", "front.csv"])
    assert isinstance(plan, RunPlan)
    assert plan.subcommand == "front" and plan.format == "csv"
    assert (plan.params.d, plan.params.r, plan.params.c) == (2, 1, 0.5)
    assert str(plan.out) == "front.csv"


def test_rates_prints_json(capsys):
    assert main(["rates", "--d", "2", "--r", "1", "--c", "2"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["lambda"] == pytest.approx(math.sqrt(2) - 1, abs=1e-12)
    assert doc["mu"] == pytest.approx(0.5) and doc["gamma"] == pytest.approx(0.5)
    assert "zeta" in doc


@pytest.mark.parametrize("argv,flag", [
    (["front", "--d", "1", "--r", "1", "--c", "1"], "--d"),
    (["front", "--d", "2", "--r", "1"], "--c"),
    (["front", "--d", "2", "--r", "1", "--c", "1", "--bogus", "3"], "--bogus"),
    (["scan", "--d", "2", "--r", "1", "--cmax", "2"], "--cmin"),
    (["pde", "--d", "2", "--r", "1", "--nx", "4"], "--nx"),
    (["front", "--d", "2", "--r", "1", "--c", "x"], "--c"),
])
def test_usage_errors(argv, flag, capsys):
    assert main(argv) == 2
    err = capsys.readouterr().err.strip()
    assert len(err.splitlines()) == 1
    assert flag in err


def test_missing_subcommand():
    with pytest.raises(UsageError):
        parse([])
    assert main(["frobnicate"]) == 2


def test_config_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# speed set here\nd = 2\nr = 1\nc = 0.7\nalpha-tol = 1e-6\n")
    assert read_config(cfg)["alpha_tol"] == "1e-6"
    plan = parse(["front", "--config", str(cfg)])
    assert plan.params.c == 0.7 and plan.options["alpha_tol"] == 1e-6
    plan = parse(["front", "--config", str(cfg), "--c", "0.9"])
    assert plan.params.c == 0.9
    plan = parse(["front"], config={"d": "2", "r": "1", "c": "0.4"})
    assert plan.params.c == 0.4 and plan.options["alpha_tol"] == 1e-8


def test_config_rejects_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("d = 2\nr = 1\nc = 1\nspeed = 3\n")
    with pytest.raises(UsageError):
        parse(["front", "--config", str(cfg)])


def test_front_outputs_are_deterministic(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"f{k}.csv"
        assert main(["front", "--d", "2", "--r", "1", "--c", "2",
                     "--out", str(out)]) == 0
        outs.append(out)
    a, b = (o.read_bytes() for o in outs)
    assert a == b
    lines = a.decode().splitlines()
    assert lines[0] == "xi,U,V,y"
    assert all(float(x) == float(repr(float(x))) for x in lines[1].split(","))
    diag = json.loads(outs[0].with_suffix(".json").read_text())
    assert list(diag) == FRONT_KEYS
    assert diag["bracket_width"] <= 1e-8


def test_scan_records(tmp_path, monkeypatch):
    monkeypatch.setenv("IFRONT_THREADS", "2")
    out = tmp_path / "scan.jsonl"
    assert main(["scan", "--d", "2", "--r", "1", "--cmin", "0.5",
                 "--cmax", "2", "--n", "3", "--alpha-tol", "1e-6",
                 "--out", str(out)]) == 0
    recs = [json.loads(line) for line in out.read_text().splitlines()]
    assert [r["c"] for r in recs] == [0.5, 1.25, 2.0]
    for rec in recs:
        assert set(rec) == {"c", "alpha1", "bracket_width", "speed_residual",
                            "tail_gamma_fit", "tail_lambda_fit",
                            "tail_mu_fit", "tail_ratio_fit"}
        assert rec["bracket_width"] <= 1e-6


def test_bad_thread_count(tmp_path, monkeypatch):
    monkeypatch.setenv("IFRONT_THREADS", "zero")
    assert main(["scan", "--d", "2", "--r", "1", "--cmin", "1", "--cmax", "1",
                 "--n", "1", "--out", str(tmp_path / "s.jsonl")]) == 2


def test_asym_compare(tmp_path):
    out = tmp_path / "asym.csv"
    assert main(["asym", "--d", "2", "--r", "1", "--c", "0.2", "--compare",
                 "--n", "200", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "xi,U0,V0,U,V" and len(lines) == 201


def test_asym_failure_names_stage(tmp_path, capsys):
    assert main(["asym", "--d", "2", "--r", "1", "--c", "1.5",
                 "--out", str(tmp_path / "a.csv")]) == 1
    assert "calibration" in capsys.readouterr().err


def test_effdiff(tmp_path):
    out = tmp_path / "phi.csv"
    assert main(["effdiff", "--d", "2", "--r", "1", "--c", "2",
                 "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == "V,phi"


def test_pde_outputs(tmp_path):
    out = tmp_path / "pde"
    assert main(["pde", "--d", "2", "--r", "1", "--L", "30", "--nx", "301",
                 "--tend", "10", "--frame-dt", "5", "--out", str(out)]) == 0
    frames = sorted(out.glob("frame_*.csv"))
    assert len(frames) == 3
    assert frames[0].read_text().splitlines()[0] == "x,U,V"
    doc = json.loads((out / "front.json").read_text())
    assert set(doc) == {"t", "front_position", "measured_speed"}
    assert doc["measured_speed"] > 0


def test_pde_boundary_failure(tmp_path):
    assert main(["pde", "--d", "2", "--r", "1", "--L", "10", "--nx", "101",
                 "--tend", "40", "--x0", "5", "--out", str(tmp_path / "p")]) == 1


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "ifront.cli", "rates", "--d",
                           "0.5", "--r", "1", "--c", "0.5"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["degenerate"] is True
