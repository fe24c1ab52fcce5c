import json
import subprocess
import sys

import numpy as np
import pytest

from sded.cli import main
from sded.config import bundled_config_path
from sded.experiments import read_sweep_csv
from sded.milp import BUNDLED_BACKEND, read_mps, solve_external
from sded.scenarios import build_discrete_pdf, load_percentile_forecasts, read_scenarios_csv

SMALL = ["--config", "bundled:three_bus"]


def run(tmp_path, *argv, name="out"):
    return main([*argv, *SMALL, "--out", str(tmp_path / name)])


def test_solve_three_bus(tmp_path, capsys):
    assert run(tmp_path, "solve") == 0
    out = tmp_path / "out"
    costs = json.loads((out / "costs.json").read_text())
    assert costs["total"] == pytest.approx(1156.76185, rel=1e-6)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 1 and manifest["n_scenarios"] == 2 and manifest["coupling"] == "rank"
    assert manifest["gap"] <= 1e-6 and "numpy" in manifest["versions"]
    assert set(manifest["outputs"]) == {"dispatch.csv", "costs.json"}
    assert len(manifest["inputs"]["case"]["sha256"]) == 64
    assert "expected cost" in capsys.readouterr().out


def test_reruns_are_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert run(tmp_path, "solve", name=name) == 0
        assert run(tmp_path, "scenarios", name=name) == 0
    for f in ("dispatch.csv", "costs.json", "scenarios.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_sweep_and_report(tmp_path, capsys):
    assert run(tmp_path, "sweep") == 0
    res = read_sweep_csv(tmp_path / "out" / "sweep.csv")
    assert res.cell("base", 20).expected_cost <= res.cell("base", 0).expected_cost
    capsys.readouterr()
    assert run(tmp_path, "report") == 0
    assert "saving" in capsys.readouterr().out
    assert main(["report", "--input", str(tmp_path / "out" / "sweep.csv")]) == 0


def test_single_unnoised_scenario_is_the_mean_path(tmp_path, monkeypatch):
    monkeypatch.setenv("SDED_N_SCENARIOS", "1")
    monkeypatch.setenv("SDED_NOISE_SIGMA", "0")
    assert run(tmp_path, "scenarios") == 0
    scen = read_scenarios_csv(tmp_path / "out" / "scenarios.csv")
    fc = load_percentile_forecasts(bundled_config_path("three_bus").parent / "three_bus_load.csv")
    mean = np.array([build_discrete_pdf(row).mean for row in fc.values])
    assert scen.probs.tolist() == [1.0]
    assert np.allclose(scen.load[0].sum(axis=1), mean * 0.75 * 200.0, rtol=1e-5)


def test_default_config_gives_fifty_scenarios(tmp_path):
    assert main(["scenarios", "--out", str(tmp_path)]) == 0
    assert read_scenarios_csv(tmp_path / "scenarios.csv").n_scenarios == 50


def test_export_then_external_solve_matches_internal(tmp_path):
    assert run(tmp_path, "export-mps") == 0
    model = read_mps(tmp_path / "out" / "model.mps")
    ext = solve_external(model, BUNDLED_BACKEND)
    assert run(tmp_path, "solve") == 0
    internal = json.loads((tmp_path / "out" / "costs.json").read_text())["solver_objective"]
    assert ext.objective == pytest.approx(internal, rel=1e-6)


def test_exit_code_config_error(tmp_path, capsys):
    assert main(["solve", "--config", str(tmp_path / "nope.json")]) == 1
    assert "nope.json" in capsys.readouterr().err
    assert main(["sweep", *SMALL, "--workers", "0"]) == 1


def test_exit_code_missing_input(tmp_path, capsys):
    cfg = json.loads(bundled_config_path("three_bus").read_text())
    cfg.update(load_forecast="missing_load.csv", case=str(bundled_config_path("three_bus").parent / cfg["case"].split(":")[-1]))
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    assert main(["scenarios", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "missing_load.csv" in capsys.readouterr().err


def test_exit_code_solve_failure(tmp_path, capsys):
    assert run(tmp_path, "solve", "--solver", "external:false") == 3
    assert "solve failed" in capsys.readouterr().err
    assert not (tmp_path / "out" / "dispatch.csv").exists()


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "sded", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "export-mps" in res.stdout
