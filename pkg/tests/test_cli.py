import json
import os

import numpy as np
import pytest

from ccportfolio import presets
from ccportfolio.cli import RunConfig, main
from reference import MU0, SIGMA

MODEL = str(presets.fixture_path("paper_model.json"))
PRICES = str(presets.fixture_path())


@pytest.fixture
def moments_file(tmp_path):
    out = tmp_path / "moments.json"
    assert main(["estimate", PRICES, "--out", str(out)]) == 0
    return out


def test_estimate_fixture(moments_file):
    doc = json.loads(moments_file.read_text())
    np.testing.assert_allclose(doc["mu0"], MU0, atol=5e-4)
    np.testing.assert_allclose(doc["sigma"], SIGMA, atol=5e-4)


def test_estimate_errors(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("date,asset,price\n2020-01-01,A,1\n2020-04-01,A,oops\n")
    assert main(["estimate", str(bad)]) == 2
    assert "line 3" in capsys.readouterr().err
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["estimate", str(empty)]) == 2
    assert "empty" in capsys.readouterr().err
    assert main(["estimate", str(tmp_path / "nope.csv")]) == 2


def test_solve_piecewise_linear(tmp_path, moments_file):
    out = tmp_path / "sol.json"
    code = main(["solve", "--model", MODEL, "--moments", str(moments_file), "--kind", "piecewise_linear",
                 "--tau", "1.5", "--beta", "0.95", "--out", str(out)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["status"] == "optimal"
    assert doc["objective"] == pytest.approx(3.3142, abs=5e-3)


def test_solve_infeasible_certificate(capsys):
    assert main(["solve", "--preset", "paper", "--kind", "bernstein", "--tau", "3.5"]) == 3
    doc = json.loads(capsys.readouterr().out)
    assert doc["status"] == "infeasible"
    assert doc["violation"] == pytest.approx(0.1967, abs=1e-3)


def test_solve_unreachable_nominal(capsys):
    assert main(["solve", "--preset", "paper", "--kind", "nominal", "--tau", str(MU0.max() + 1)]) == 3


def test_solve_needs_inputs(capsys):
    assert main(["solve", "--kind", "nominal", "--tau", "1"]) == 2
    assert main(["solve", "--preset", "paper", "--kind", "cubic"]) == 2


def test_config_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"preset": "paper", "kind": "bernstein", "tau": 2.5}))
    assert main(["solve", "--config", str(cfg)]) == 0
    assert json.loads(capsys.readouterr().out)["objective"] == pytest.approx(7.3316, abs=5e-3)
    assert main(["solve", "--config", str(cfg), "--kind", "piecewise_linear"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["kind"] == "piecewise_linear" and doc["objective"] == pytest.approx(4.2386, abs=5e-3)
    cfg.write_text(json.dumps({"colour": "red"}))
    assert main(["solve", "--config", str(cfg)]) == 2
    cfg.write_text("{")
    assert main(["solve", "--config", str(cfg)]) == 2


def test_run_config_merge():
    cfg = RunConfig.merge({"kind": "nominal", "seed": 3}, {"kind": None, "seed": 9, "verbose": True})
    assert cfg.kind == "nominal" and cfg.seed == 9


def test_frontier_all_kinds(tmp_path):
    csv = tmp_path / "f.csv"
    svg = tmp_path / "f.svg"
    assert main(["frontier", "--preset", "paper", "--kind", "all", "--tau-range", "1.5:3.5:0.2",
                 "--out-csv", str(csv), "--out-svg", str(svg)]) == 0
    for kind in ("nominal", "piecewise_linear", "bernstein", "piecewise_quadratic"):
        assert (tmp_path / f"f-{kind}.csv").exists()
        assert (tmp_path / f"f-{kind}.svg").exists()
    lines = (tmp_path / "f-piecewise_linear.csv").read_text().splitlines()
    assert len(lines) == 12


def test_frontier_errors(tmp_path):
    assert main(["frontier", "--preset", "paper", "--tau-range", "1.5:3.5:0"]) == 2
    assert main(["frontier", "--preset", "paper", "--out-csv", str(tmp_path / "no" / "x.csv")]) == 2


@pytest.mark.skipif(os.geteuid() == 0, reason="root ignores directory permissions")
def test_frontier_read_only_dir(tmp_path):
    ro = tmp_path / "ro"
    ro.mkdir()
    ro.chmod(0o500)
    try:
        assert main(["frontier", "--preset", "paper", "--out-csv", str(ro / "x.csv")]) == 2
    finally:
        ro.chmod(0o700)


def test_validate_round_trip(tmp_path, capsys):
    sol = tmp_path / "sol.json"
    report = tmp_path / "report.json"
    assert main(["solve", "--preset", "paper", "--kind", "bernstein", "--tau", "2.5", "--out", str(sol)]) == 0
    assert main(["validate", str(sol), "--preset", "paper", "--count", "2000", "--seed", "42", "--out", str(report)]) == 0
    text = capsys.readouterr().out
    assert "point_mass[LLL]" in text and "truncated_normal[upper]" in text
    doc = json.loads(report.read_text())
    assert doc["tau"] == 2.5 and all(r["verdict"] == "pass" for r in doc["results"])
    assert main(["validate", str(sol), "--model", MODEL, "--count", "100"]) == 0


def test_validate_errors(tmp_path):
    assert main(["validate"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    assert main(["validate", str(bad), "--preset", "paper"]) == 2


def test_help(capsys):
    for cmd in ("estimate", "solve", "frontier", "validate"):
        with pytest.raises(SystemExit) as exc:
            main([cmd, "--help"])
        assert exc.value.code == 0
