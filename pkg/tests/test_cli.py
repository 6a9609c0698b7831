import csv
import json

import numpy as np
import pytest

from laxbalance.cli import main


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# laxbalance ") and lines[0].endswith(" v1")
    return list(csv.DictReader(lines[1:]))


def report(out):
    return json.loads((out / "report.json").read_text())


def test_solve_riemann(tmp_path):
    out = tmp_path / "solve"
    code = main(["solve", "--preset", "burgers-riemann", "--t", "1.0", "--cells", "200", "--table-n", "256",
                 "--out", str(out)])
    assert code == 0
    rows = read_csv(out / "field.csv")
    assert len(rows) == 200 and set(rows[0]) >= {"x", "t", "u", "W", "branch"}
    jumps = read_csv(out / "field_jumps.csv")
    assert len(jumps) == 1 and abs(float(jumps[0]["x_jump"]) - 1.5) < 0.03
    assert report(out)["status"] == "ok"
    assert read_csv(out / "boundary_table.csv")[0]["mechanism"] == "origin"


def test_check_dpp_zero(tmp_path):
    out = tmp_path / "dpp"
    assert main(["check", "dpp", "--preset", "zero", "--out", str(out), "--table-n", "64"]) == 0
    rep = report(out)
    assert rep["checks"]["dpp"]["max_residual"] <= 1e-12 and rep["exit_code"] == 0


def test_probe_example(tmp_path):
    out = tmp_path / "probe"
    code = main(["boundary-table", "--preset", "example-1-1", "--probe-hcurve", "24,5:24,0", "--table-n", "16",
                 "--out", str(out)])
    assert code == 0
    probe = report(out)["probe_hcurve"]
    assert probe["y0"] == pytest.approx(10.0, abs=1e-6) and probe["admissible"] is False


def test_config_errors_exit_one(tmp_path):
    out = tmp_path / "bad"
    assert main(["solve", "--preset", "nonexistent", "--out", str(out)]) == 1
    assert report(out)["status"] == "config-error"
    assert main(["solve", "--out", str(out)]) == 1
    assert main(["solve", "--preset", "zero", "--t", "9", "--out", str(out)]) == 1
    assert main(["solve", "--preset", "zero", "--probe-hcurve", "1,2", "--out", str(out)]) == 1
    assert main(["frobnicate"]) == 1


def test_failed_check_exits_three(tmp_path):
    out = tmp_path / "weak"
    code = main(["check", "--check", "weak", "--preset", "burgers-boundary", "--cells", "6", "--table-n", "32",
                 "--out", str(out)])
    rep = report(out)
    assert code == 3 and rep["status"] == "check-failed" and rep["checks"]["weak"]["residual"] > 5e-3


def test_trace_triangles_oracle_compare(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text('preset = "burgers-boundary"\n[grids]\ncells = 40\ntable_n = 128\nt = 1.0\noracle_cells = 80\n'
                   '[trace]\nx0 = 0.5\nt0 = 1.0\nt1 = 1.5\ndt = 0.05\n')
    for command in ("trace", "triangles", "oracle", "compare"):
        out = tmp_path / command
        assert main([command, "--config", str(cfg), "--out", str(out)]) == 0, command
    rows = read_csv(tmp_path / "trace" / "trace.csv")
    assert abs(float(rows[-1]["x"]) - 0.75) < 0.05
    assert report(tmp_path / "triangles")["triangles"]["verdict"] == "pass"
    oracle = read_csv(tmp_path / "oracle" / "oracle.csv")
    assert len(oracle) == 80
    assert report(tmp_path / "compare")["compare"]["l1"] < 0.05


def test_bln_entropy_monotone_checks(tmp_path):
    out = tmp_path / "checks"
    code = main(["check", "bln,entropy,monotone,nip", "--preset", "burgers-boundary", "--cells", "50",
                 "--table-n", "128", "--out", str(out)])
    rep = report(out)
    assert code == 0, rep
    assert {"bln", "entropy", "monotone", "nip"} <= set(rep["checks"])
    assert all(v["verdict"] == "pass" for v in rep["checks"].values())
    assert np.isfinite(rep["checks"]["bln"]["points"][0]["u_trace"])
