import json

import pytest

from sded.config import ConfigError, RunConfig, bundled_config_path, load_config
from sded.formulation import CostParams


def test_defaults_mirror_study_parameters():
    cfg = RunConfig()
    assert (cfg.n_scenarios, cfg.noise_sigma, cfg.horizon_steps) == (50, 0.10, 8)
    c = cfg.costs
    assert (c.c_wind_curtail, c.c_load_curtail, c.c_gen_curtail, c.c_charge, c.c_discharge) == (100, 3000, 400, 10, 10)
    assert (c.regulation_multiplier, c.dt_hours) == (1.5, 0.25)


def test_bundled_configs_load():
    big = load_config(bundled_config_path("ieee39"), env={})
    small = load_config(bundled_config_path("three_bus"), env={})
    assert big.n_scenarios == 50 and big.penetration == "20%"
    assert big.resolve(big.case).exists() and small.resolve(small.load_forecast).exists()
    assert small.penetration_configs == {"base": []}


def test_precedence_file_env_overrides(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"seed": 5, "n_scenarios": 3, "costs": {"c_charge": 2.0}}))
    assert load_config(path, env={}).seed == 5
    env = {"SDED_SEED": "6", "SDED_N_SCENARIOS": "4", "SDED_COSTS_C_CHARGE": "3.5"}
    cfg = load_config(path, env=env)
    assert (cfg.seed, cfg.n_scenarios, cfg.costs.c_charge) == (6, 4, 3.5)
    cfg = load_config(path, env=env, overrides={"seed": 7, "solver": None})
    assert cfg.seed == 7 and cfg.n_scenarios == 4 and cfg.solver == "internal"


def test_env_types_are_coerced():
    env = {"SDED_TERMINAL_SOC": "yes", "SDED_BESS_BUSES": "[3, 4]", "SDED_RATE_LIMIT": "x",
           "SDED_REL_GAP": "1e-3", "SDED_HORIZON_STEPS": "none"}
    cfg = load_config(env=env)
    assert cfg.terminal_soc is True and cfg.bess_buses == (3, 4)
    assert cfg.rel_gap == 1e-3 and cfg.horizon_steps is None


def test_relative_paths_resolve_against_config_dir(tmp_path):
    path = tmp_path / "sub" / "run.json"
    path.parent.mkdir()
    path.write_text(json.dumps({"case": "grid.json"}))
    cfg = load_config(path, env={})
    assert cfg.resolve(cfg.case) == path.parent / "grid.json"


@pytest.mark.parametrize("data, match", [
    ({"n_scenarios": 0}, "n_scenarios"),
    ({"noise_sigma": -0.1}, "sigma"),
    ({"coupling": "psychic"}, "coupling"),
    ({"solver": "gurobi"}, "solver"),
    ({"penetration": "55%"}, "penetration"),
    ({"bogus": 1}, "unknown config keys"),
    ({"costs": {"c_charge": -1}}, "c_charge"),
    ({"sweep": {"configs": ["90%"]}}, "sweep config"),
])
def test_config_errors(tmp_path, data, match):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(data))
    with pytest.raises(ConfigError, match=match):
        load_config(path, env={})


def test_unreadable_configs(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.json", env={})
    (tmp_path / "x.json").write_text("[1, 2]")
    with pytest.raises(ConfigError, match="object"):
        load_config(tmp_path / "x.json", env={})
    with pytest.raises(ConfigError, match="SDED_SEED"):
        load_config(env={"SDED_SEED": "seven"})


def test_to_dict_round_trips():
    cfg = RunConfig(costs=CostParams(c_charge=4.0))
    d = json.loads(json.dumps(cfg.to_dict()))
    assert "base_dir" not in d and d["costs"]["c_charge"] == 4.0
