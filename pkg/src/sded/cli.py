"""``sded`` command line: scenarios, solve, sweep, export-mps, report.

Exit codes: 0 success, 1 configuration error, 2 input/output error, 3 solve failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import platform
import sys
from dataclasses import replace
from importlib import metadata
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, bundled_config_path, load_config
from .errors import IoError, SdedError, SolveFailure
from .experiments import (
    DISPATCH_FIELDS, SweepSpec, build_cell_case, dispatch_rows, emit_report, format_savings_table,
    read_sweep_csv, run_sweep, truncate_forecast, write_csv,
)
from .formulation import build_extensive_form, extract_solution, verify_solution
from .grid import load_case
from .milp import write_mps
from .scenarios import build_scenario_paths, disaggregate_to_buses, load_percentile_forecasts, write_scenarios_csv
from .solve import solve

EXIT_OK, EXIT_CONFIG, EXIT_INPUT, EXIT_SOLVE = 0, 1, 2, 3


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _versions() -> dict:
    out = {"python": platform.python_version()}
    for dist in ("artifact", "numpy", "scipy", "numba"):
        try:
            out[dist] = metadata.version(dist)
        except metadata.PackageNotFoundError:
            out[dist] = None
    return out


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create output directory {out}: {exc}") from None
    return out


def write_manifest(cfg: RunConfig, out: Path, command: str, outputs, **extra) -> Path:
    """Record inputs, outputs (with sha256), seed, K, coupling and package versions."""
    inputs = {k: cfg.resolve(getattr(cfg, k)) for k in ("case", "load_forecast", "wind_forecast")}
    manifest = {
        "command": command,
        "seed": cfg.seed,
        "n_scenarios": cfg.n_scenarios,
        "coupling": cfg.coupling,
        "solver": cfg.solver,
        "inputs": {k: {"path": str(p), "sha256": _sha256(p)} for k, p in inputs.items()},
        "outputs": {Path(p).name: _sha256(p) for p in outputs},
        "config": cfg.to_dict(),
        "versions": _versions(),
        **extra,
    }
    path = out / "manifest.json"
    try:
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_jsonable) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None
    return path


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    return str(v)


def _forecasts(cfg: RunConfig):
    load_fc = load_percentile_forecasts(cfg.resolve(cfg.load_forecast), "load")
    wind_fc = load_percentile_forecasts(cfg.resolve(cfg.wind_forecast), "wind")
    return truncate_forecast(load_fc, cfg.horizon_steps), truncate_forecast(wind_fc, cfg.horizon_steps)


def _spec(cfg: RunConfig, sweep: bool) -> SweepSpec:
    if sweep:
        configs = {k: cfg.penetration_configs[k] for k in cfg.sweep.configs}
        sizes, workers = cfg.sweep.sizes_mw, cfg.sweep.workers
    else:
        configs = {cfg.penetration or "none": cfg.gen_ids}
        sizes, workers = (cfg.bess_mw,), 1
    return SweepSpec(configs, sizes, cfg.bess_buses, cfg.seed, cfg.costs, cfg.n_scenarios, cfg.coupling,
                     cfg.noise_sigma, cfg.load_level, cfg.wind_level, cfg.horizon_steps, cfg.solver,
                     cfg.rel_gap, cfg.time_limit, cfg.lp_engine, workers, cfg.options)


def _scenario_set(cfg: RunConfig, case):
    load_fc, wind_fc = _forecasts(cfg)
    paths = build_scenario_paths(load_fc, wind_fc, cfg.n_scenarios, cfg.coupling, cfg.seed)
    return disaggregate_to_buses(paths, case, cfg.noise_sigma, cfg.seed, cfg.load_level, cfg.wind_level)


def _case(cfg: RunConfig):
    return build_cell_case(load_case(cfg.resolve(cfg.case)), cfg.gen_ids, cfg.bess_mw, cfg.bess_buses)


# -- commands ---------------------------------------------------------------------------


def cmd_scenarios(cfg: RunConfig) -> dict:
    case = _case(cfg)
    scen = _scenario_set(cfg, case)
    out = _out_dir(cfg)
    path = out / "scenarios.csv"
    write_scenarios_csv(scen, path)
    write_manifest(cfg, out, "scenarios", [path])
    return {"scenarios": scen, "path": path}


def cmd_solve(cfg: RunConfig) -> dict:
    case = _case(cfg)
    scen = _scenario_set(cfg, case)
    form = build_extensive_form(case, scen, cfg.costs, cfg.options)
    raw = solve(form, cfg.solver, cfg.rel_gap, cfg.time_limit, lp_engine=cfg.lp_engine)
    sol = extract_solution(raw, form, case, scen, cfg.costs)
    report = verify_solution(sol, case, scen, cfg.costs)
    if not report.passed:
        raise SolveFailure(f"solution fails constraint replay: {sorted(report.failures())}")
    out = _out_dir(cfg)
    dispatch = out / "dispatch.csv"
    write_csv(dispatch, DISPATCH_FIELDS, dispatch_rows(sol))
    costs_path = out / "costs.json"
    dt = cfg.costs.dt_hours
    summary = {
        **{k: float(v) for k, v in sol.costs.items()},
        "solver_objective": float(raw.objective),
        "expected_wind_curtailment_mwh": sol.expected_wind_curtailment_mwh(dt),
        "first_stage_wind_curtailment_mwh": sol.first_stage_wind_curtailment_mwh(dt),
        "max_residual": report.max_residual,
    }
    costs_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    write_manifest(cfg, out, "solve", [dispatch, costs_path], gap=float(raw.gap), status=raw.status,
                   nodes=int(raw.nodes))
    return {"solution": sol, "raw": raw, "report": report, "summary": summary}


def cmd_sweep(cfg: RunConfig) -> dict:
    spec = _spec(cfg, sweep=True)
    case = load_case(cfg.resolve(cfg.case))
    result = run_sweep(spec, case, _forecasts(cfg), keep_dispatch=True)
    key = (cfg.penetration, float(cfg.bess_mw))
    dispatch = result.dispatches.get(key)
    if dispatch is None and result.dispatches:
        dispatch = next(iter(result.dispatches.values()))
    out = _out_dir(cfg)
    files = emit_report(result, dispatch, out)
    failed = [c for c in result.cells if c.status != "ok"]
    write_manifest(cfg, out, "sweep", files, gaps={f"{c.config}@{c.bess_mw:g}": c.gap for c in result.cells},
                   failed_cells=len(failed))
    if failed:
        raise SolveFailure(f"{len(failed)} sweep cell(s) failed; see sweep.csv (outputs were written)")
    return {"result": result, "files": files}


def cmd_export_mps(cfg: RunConfig) -> dict:
    case = _case(cfg)
    scen = _scenario_set(cfg, case)
    form = build_extensive_form(case, scen, cfg.costs, cfg.options)
    out = _out_dir(cfg)
    path = write_mps(form.model, out / "model.mps")
    write_manifest(cfg, out, "export-mps", [path], n_vars=form.model.n_vars, n_rows=form.model.n_rows,
                   obj_offset=float(form.model.obj_offset))
    return {"path": path, "form": form}


def cmd_report(cfg: RunConfig, sweep_csv=None) -> dict:
    path = Path(sweep_csv) if sweep_csv else Path(cfg.out) / "sweep.csv"
    result = read_sweep_csv(path)
    return {"result": result, "table": format_savings_table(result)}


# -- entry point ------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config, or bundled:<name> (ieee39, three_bus)")
    common.add_argument("--seed", type=int)
    common.add_argument("--solver", help="internal | internal-fastpath | enumerate | highs | external[:cmd]")
    common.add_argument("--out", help="output directory")
    p = argparse.ArgumentParser(prog="sded", description=__doc__.splitlines()[0],
                                epilog="Environment overrides: SDED_<FIELD>, SDED_COSTS_<FIELD>.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("scenarios", parents=[common], help="generate the scenario CSV")
    sub.add_parser("solve", parents=[common], help="solve one dispatch and write dispatch.csv/costs.json")
    sw = sub.add_parser("sweep", parents=[common], help="storage size x penetration sweep")
    sw.add_argument("--workers", type=int)
    sub.add_parser("export-mps", parents=[common], help="write the extensive form as MPS")
    rp = sub.add_parser("report", parents=[common], help="print the savings table of a sweep")
    rp.add_argument("--input", help="sweep.csv to read (default <out>/sweep.csv)")
    return p


def config_from_args(args) -> RunConfig:
    path = args.config
    if path is None:
        path = bundled_config_path("ieee39")
    elif path.startswith("bundled:"):
        path = bundled_config_path(path.split(":", 1)[1])
    overrides = {"seed": args.seed, "solver": args.solver, "out": args.out}
    cfg = load_config(path, overrides=overrides)
    workers = getattr(args, "workers", None)
    if workers is not None:
        if workers < 1:
            raise ConfigError("--workers must be at least 1")
        cfg = replace(cfg, sweep=replace(cfg.sweep, workers=workers))
    return cfg


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        print(f"sded: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "scenarios":
            res = cmd_scenarios(cfg)
            print(f"wrote {res['path']} ({res['scenarios'].n_scenarios} scenarios)")
        elif args.command == "solve":
            res = cmd_solve(cfg)
            s = res["summary"]
            print(f"status {res['raw'].status}  gap {res['raw'].gap:.2e}  expected cost ${s['total']:,.2f}")
            print(f"expected wind curtailment {s['expected_wind_curtailment_mwh']:.3f} MWh")
        elif args.command == "sweep":
            res = cmd_sweep(cfg)
            print(format_savings_table(res["result"]))
        elif args.command == "export-mps":
            res = cmd_export_mps(cfg)
            print(f"wrote {res['path']}")
        else:
            print(cmd_report(cfg, args.input)["table"])
    except SolveFailure as exc:
        print(f"sded: solve failed: {exc}", file=sys.stderr)
        return EXIT_SOLVE
    except ConfigError as exc:
        print(f"sded: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SdedError, OSError) as exc:
        print(f"sded: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
