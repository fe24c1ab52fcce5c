"""Run configuration: JSON file, then ``SDED_*`` environment variables, then CLI flags.

Relative paths resolve against the config file's directory; ``bundled:<file>``
names a file shipped in ``sded/data``. Every top-level scalar field can be
overridden from the environment by upper-casing it with an ``SDED_`` prefix
(``SDED_SEED=7``, ``SDED_SOLVER=highs``, ``SDED_N_SCENARIOS=10``); cost fields
take ``SDED_COSTS_`` (``SDED_COSTS_C_WIND_CURTAIL=50``).
"""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from .formulation import CostParams, FormulationOptions
from .grid import PENETRATION_CONFIGS
from .scenarios import COUPLINGS
from .solve import check_solver_name

DATA_DIR = Path(__file__).resolve().parent / "data"
ENV_PREFIX = "SDED_"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SweepSettings:
    configs: tuple = ("10%", "20%", "30%", "40%")
    sizes_mw: tuple = (0, 20, 40, 60, 80, 100, 120)
    workers: int = 1


@dataclass(frozen=True)
class RunConfig:
    case: str = "bundled:ieee39.case.json"
    load_forecast: str = "bundled:ercot_west_load.csv"
    wind_forecast: str = "bundled:ercot_west_wind.csv"
    penetration: Optional[str] = "20%"      # key of penetration_configs, or None for no conversion
    penetration_configs: dict = field(default_factory=lambda: {k: list(v) for k, v in PENETRATION_CONFIGS.items()})
    bess_mw: float = 20.0
    bess_buses: tuple = (21, 28)
    n_scenarios: int = 50
    coupling: str = "rank"
    noise_sigma: float = 0.10
    seed: int = 2018
    load_level: float = 1.0
    wind_level: float = 1.0
    horizon_steps: Optional[int] = 8
    costs: CostParams = field(default_factory=CostParams)
    solver: str = "internal"
    lp_engine: str = "simplex"
    rel_gap: Optional[float] = None
    time_limit: Optional[float] = None
    terminal_soc: bool = False
    out: str = "out"
    sweep: SweepSettings = field(default_factory=SweepSettings)
    base_dir: str = "."

    def __post_init__(self):
        if self.n_scenarios < 1:
            raise ConfigError("n_scenarios must be at least 1")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be nonnegative")
        if self.coupling not in COUPLINGS:
            raise ConfigError(f"coupling must be one of {COUPLINGS}")
        if self.bess_mw < 0:
            raise ConfigError("bess_mw must be nonnegative")
        if self.penetration is not None and self.penetration not in self.penetration_configs:
            raise ConfigError(f"unknown penetration {self.penetration!r}")
        if self.horizon_steps is not None and self.horizon_steps < 1:
            raise ConfigError("horizon_steps must be positive")
        try:
            check_solver_name(self.solver)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.lp_engine not in ("simplex", "highs"):
            raise ConfigError("lp_engine must be 'simplex' or 'highs'")
        for cfg in self.sweep.configs:
            if cfg not in self.penetration_configs:
                raise ConfigError(f"sweep config {cfg!r} is not a penetration config")

    def resolve(self, value: str) -> Path:
        if value.startswith("bundled:"):
            return DATA_DIR / value.split(":", 1)[1]
        p = Path(value)
        return p if p.is_absolute() else Path(self.base_dir) / p

    @property
    def options(self) -> FormulationOptions:
        return FormulationOptions(terminal_soc=self.terminal_soc)

    @property
    def gen_ids(self) -> tuple:
        return tuple(self.penetration_configs[self.penetration]) if self.penetration else ()

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return d


def _coerce(text: str, current):
    """Parse an environment string into the type of the field's current value."""
    if text.lower() in ("none", "null") and not isinstance(current, str):
        return None
    if isinstance(current, bool):
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"expected a boolean, got {text!r}")
    if isinstance(current, (int, float)):
        return type(current)(text)
    if isinstance(current, (tuple, list, dict)):
        try:
            value = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"expected JSON, got {text!r}") from exc
        return tuple(value) if isinstance(current, tuple) else value
    if current is None:
        if text == "":
            return None
        for kind in (int, float):
            try:
                return kind(text)
            except ValueError:
                pass
    return text


def _from_mapping(data: dict, base_dir: str) -> RunConfig:
    data = dict(data)
    known = {f.name for f in fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        if "costs" in data and isinstance(data["costs"], dict):
            data["costs"] = CostParams(**data["costs"])
        if "sweep" in data and isinstance(data["sweep"], dict):
            sw = dict(data["sweep"])
            for k in ("configs", "sizes_mw"):
                if k in sw:
                    sw[k] = tuple(sw[k])
            data["sweep"] = SweepSettings(**sw)
        if "bess_buses" in data:
            data["bess_buses"] = tuple(data["bess_buses"])
        return RunConfig(**data, base_dir=base_dir)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path=None, env=None, overrides=None) -> RunConfig:
    """Defaults, then the JSON file at ``path``, then environment, then ``overrides``."""
    env = os.environ if env is None else env
    data, base_dir = {}, "."
    if path is not None:
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        base_dir = str(path.resolve().parent)
    cfg = _from_mapping(data, base_dir)

    changes, cost_changes = {}, {}
    for f in fields(RunConfig):
        key = ENV_PREFIX + f.name.upper()
        if key in env and f.name not in ("costs", "sweep", "base_dir"):
            try:
                changes[f.name] = _coerce(env[key], getattr(cfg, f.name))
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from None
    for f in fields(CostParams):
        key = ENV_PREFIX + "COSTS_" + f.name.upper()
        if key in env:
            try:
                cost_changes[f.name] = _coerce(env[key], getattr(cfg.costs, f.name))
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from None
    for k, v in (overrides or {}).items():
        if v is not None:
            changes[k] = v
    try:
        if cost_changes:
            changes["costs"] = replace(cfg.costs, **cost_changes)
        return replace(cfg, **changes) if changes else cfg
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def bundled_config_path(name: str) -> Path:
    return DATA_DIR / f"{name}.config.json"
