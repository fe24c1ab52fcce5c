"""Storage-size x wind-penetration sweeps, savings tables and plot-ready CSV reports."""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import IoError, MissingBaseline, ParseError, SdedError
from .formulation import (
    CostParams, DispatchSolution, FormulationOptions, build_extensive_form, extract_solution,
    verify_solution,
)
from .grid import GridCase, apply_wind_conversion, attach_storage, penetration_level, storage_at
from .scenarios import PercentileForecast, build_scenario_paths, disaggregate_to_buses
from .solve import solve

OK, FAILED = "ok", "failed"


@dataclass(frozen=True)
class SweepSpec:
    """Penetration configurations are ``label -> generator ids converted to wind``."""

    penetration_configs: dict
    bess_sizes_mw: tuple = (0, 20, 40, 60, 80, 100, 120)
    bess_buses: tuple = (21, 28)
    seed: int = 2018
    costs: CostParams = field(default_factory=CostParams)
    n_scenarios: int = 50
    coupling: str = "rank"
    noise_sigma: float = 0.10
    load_level: float = 1.0
    wind_level: float = 1.0
    horizon_steps: Optional[int] = None
    solver: str = "highs"
    rel_gap: Optional[float] = None
    time_limit: Optional[float] = None
    lp_engine: str = "simplex"
    workers: int = 1
    options: FormulationOptions = field(default_factory=FormulationOptions)

    def __post_init__(self):
        if not self.penetration_configs:
            raise ValueError("a sweep needs at least one penetration configuration")
        if any(s < 0 for s in self.bess_sizes_mw):
            raise ValueError("storage sizes must be nonnegative")
        object.__setattr__(self, "penetration_configs",
                           {str(k): tuple(v) for k, v in self.penetration_configs.items()})
        object.__setattr__(self, "bess_sizes_mw", tuple(float(s) for s in self.bess_sizes_mw))
        object.__setattr__(self, "bess_buses", tuple(self.bess_buses))


@dataclass
class SweepCell:
    config: str
    penetration: float
    bess_mw: float
    status: str
    expected_cost: float = math.nan
    expected_wind_curtailment_mwh: float = math.nan
    first_stage_wind_curtailment_mwh: float = math.nan
    expected_recourse: float = math.nan
    savings_abs: float = math.nan
    savings_pct: float = math.nan
    gap: float = math.nan
    nodes: int = 0
    message: str = ""
    wall_time: float = 0.0  # kept out of the CSV so reports stay byte-stable


CSV_FIELDS = [f.name for f in fields(SweepCell) if f.name != "wall_time"]


@dataclass
class SweepResult:
    cells: list = field(default_factory=list)
    dispatches: dict = field(default_factory=dict, repr=False)  # (config, size) -> DispatchSolution

    def cell(self, config: str, size: float) -> SweepCell:
        for c in self.cells:
            if c.config == config and c.bess_mw == float(size):
                return c
        raise KeyError((config, size))

    def configs(self) -> list:
        return list(dict.fromkeys(c.config for c in self.cells))

    def series(self, config: str, attr: str) -> tuple:
        cells = sorted((c for c in self.cells if c.config == config), key=lambda c: c.bess_mw)
        return [c.bess_mw for c in cells], [getattr(c, attr) for c in cells]

    def rounded(self) -> "SweepResult":
        """Copy with every float rounded to the 6 significant digits used in CSV files."""
        cells = [replace(c, **{k: _round6(getattr(c, k)) for k in CSV_FIELDS
                               if isinstance(getattr(c, k), float)}, wall_time=0.0)
                 for c in self.cells]
        return SweepResult(cells)


def _round6(v: float) -> float:
    return float(f"{v:.6g}")


def build_cell_case(case: GridCase, gen_ids: Sequence[str], size_mw: float, buses) -> GridCase:
    variant = apply_wind_conversion(case, gen_ids)
    if size_mw > 0:
        variant = attach_storage(variant, storage_at(buses, size_mw))
    return variant


def truncate_forecast(fc: PercentileForecast, steps):
    if steps is None or steps >= fc.n_steps:
        return fc
    return PercentileForecast(fc.horizon[:steps], fc.series_kind, fc.values[:steps], fc.scale)


def run_cell(spec: SweepSpec, case: GridCase, forecasts, config: str, size: float, keep_dispatch=False):
    """Solve one (configuration, storage size) cell; failures come back as a FAILED cell."""
    import time

    start = time.perf_counter()
    gen_ids = spec.penetration_configs[config]
    try:
        variant = build_cell_case(case, gen_ids, size, spec.bess_buses)
        load_fc, wind_fc = (truncate_forecast(f, spec.horizon_steps) for f in forecasts)
        paths = build_scenario_paths(load_fc, wind_fc, spec.n_scenarios, spec.coupling, spec.seed)
        scen = disaggregate_to_buses(paths, variant, spec.noise_sigma, spec.seed,
                                     spec.load_level, spec.wind_level)
        form = build_extensive_form(variant, scen, spec.costs, spec.options)
        raw = solve(form, spec.solver, spec.rel_gap, spec.time_limit, lp_engine=spec.lp_engine)
        sol = extract_solution(raw, form, variant, scen, spec.costs)
        report = verify_solution(sol, variant, scen, spec.costs)
        if not report.passed:
            raise SdedError(f"constraint replay failed: {sorted(report.failures())}")
    except (SdedError, ValueError) as exc:
        pen = penetration_level(apply_wind_conversion(case, gen_ids)) if _known(case, gen_ids) else math.nan
        return SweepCell(config, pen, float(size), FAILED, message=f"{type(exc).__name__}: {exc}",
                         wall_time=time.perf_counter() - start), None
    dt = spec.costs.dt_hours
    cell = SweepCell(
        config, penetration_level(variant), float(size), OK,
        expected_cost=float(sol.costs["total"]),
        expected_wind_curtailment_mwh=sol.expected_wind_curtailment_mwh(dt),
        first_stage_wind_curtailment_mwh=sol.first_stage_wind_curtailment_mwh(dt),
        expected_recourse=float(sol.costs["expected_recourse"]),
        gap=float(raw.gap), nodes=int(raw.nodes), wall_time=time.perf_counter() - start,
    )
    return cell, (sol if keep_dispatch else None)


def _known(case, gen_ids):
    ids = {g.id for g in case.generators}
    return all(g in ids for g in gen_ids)


def _cell_job(args):
    return run_cell(*args)


def run_sweep(spec: SweepSpec, case: GridCase, forecasts, keep_dispatch: bool = False) -> SweepResult:
    """Solve every (configuration, size) cell with the shared seed.

    Cells may run in a process pool (``spec.workers``); results are assembled
    in (configuration, size) order so output does not depend on scheduling.
    """
    jobs = [(spec, case, tuple(forecasts), cfg, size, keep_dispatch)
            for cfg in spec.penetration_configs for size in spec.bess_sizes_mw]
    if spec.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            outcomes = list(pool.map(_cell_job, jobs))
    else:
        outcomes = [_cell_job(j) for j in jobs]
    result = SweepResult()
    for (cell, sol) in outcomes:
        result.cells.append(cell)
        if sol is not None:
            result.dispatches[(cell.config, cell.bess_mw)] = sol
    _fill_savings(result)
    return result


def savings(cost0: float, cost: float) -> tuple:
    """(absolute, percent) saving of ``cost`` relative to the no-storage ``cost0``."""
    diff = cost0 - cost
    return diff, 100.0 * diff / cost0


def _baseline(result: SweepResult, config: str) -> SweepCell:
    for c in result.cells:
        if c.config == config and c.bess_mw == 0.0 and c.status == OK:
            return c
    raise MissingBaseline(f"configuration {config!r} has no solved 0 MW cell")


def _fill_savings(result: SweepResult):
    for cfg in result.configs():
        try:
            base = _baseline(result, cfg)
        except MissingBaseline:
            continue
        for c in result.cells:
            if c.config == cfg and c.status == OK:
                c.savings_abs, c.savings_pct = savings(base.expected_cost, c.expected_cost)


def compute_savings(result: SweepResult) -> list:
    """Rows ``(config, bess_mw, cost, savings_abs, savings_pct)`` for every solved cell."""
    rows = []
    for cfg in result.configs():
        base = _baseline(result, cfg)
        for c in sorted((c for c in result.cells if c.config == cfg and c.status == OK),
                        key=lambda c: c.bess_mw):
            s_abs, s_pct = savings(base.expected_cost, c.expected_cost)
            rows.append((cfg, c.bess_mw, c.expected_cost, s_abs, s_pct))
    return rows


# -- CSV output -------------------------------------------------------------------------

DISPATCH_FIELDS = ["t", "demand_mw", "cgd_mw", "wg_mw", "bd_mw", "wc_mw"]
CURTAILMENT_FIELDS = ["config", "penetration", "bess_mw", "expected_wind_curtailment_mwh",
                      "first_stage_wind_curtailment_mwh"]
SAVINGS_FIELDS = ["config", "penetration", "bess_mw", "expected_cost", "savings_abs", "savings_pct"]


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6g}"
    return str(v)


def write_csv(path: Path, header, rows):
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None


def dispatch_rows(dispatch: DispatchSolution) -> list:
    """Per-step system totals: demand, conventional generation, wind used, battery, wind curtailed."""
    T = dispatch.n_steps
    gen = dispatch.generation.sum(axis=0) - dispatch.gen_curtail.sum(axis=0)
    wc = dispatch.wind_curtail.sum(axis=0)
    wg = dispatch.available_wind - wc
    bd = dispatch.battery_dispatch.sum(axis=0) if dispatch.charge.size else np.zeros(T)
    return [(t + 1, float(dispatch.demand[t]), float(gen[t]), float(wg[t]), float(bd[t]), float(wc[t]))
            for t in range(T)]


def emit_report(result: SweepResult, dispatch: Optional[DispatchSolution], path) -> list:
    """Write sweep.csv, dispatch.csv, curtailment_curve.csv and savings_curve.csv under ``path``."""
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {out}: {exc}") from None
    cells = sorted(result.cells, key=lambda c: (result.configs().index(c.config), c.bess_mw))
    files = [out / n for n in ("sweep.csv", "dispatch.csv", "curtailment_curve.csv", "savings_curve.csv")]
    write_csv(files[0], CSV_FIELDS, ([getattr(c, k) for k in CSV_FIELDS] for c in cells))
    write_csv(files[1], DISPATCH_FIELDS, dispatch_rows(dispatch) if dispatch is not None else [])
    ok = [c for c in cells if c.status == OK]
    write_csv(files[2], CURTAILMENT_FIELDS,
           ([c.config, c.penetration, c.bess_mw, c.expected_wind_curtailment_mwh,
             c.first_stage_wind_curtailment_mwh] for c in ok))
    write_csv(files[3], SAVINGS_FIELDS,
           ([c.config, c.penetration, c.bess_mw, c.expected_cost, c.savings_abs, c.savings_pct]
            for c in ok if not math.isnan(c.savings_abs)))
    return files


def read_sweep_csv(path) -> SweepResult:
    """Parse a sweep.csv back into a SweepResult (values carry 6 significant digits)."""
    types = {f.name: f.type for f in fields(SweepCell)}
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != CSV_FIELDS:
                raise ParseError(f"{path}: unexpected header {reader.fieldnames}")
            cells = []
            for row in reader:
                kw = {}
                for k, v in row.items():
                    t = types[k]
                    kw[k] = int(v) if t in ("int", int) else float(v) if t in ("float", float) else v
                cells.append(SweepCell(**kw))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{path}: {exc}") from None
    return SweepResult(cells)


def format_savings_table(result: SweepResult) -> str:
    lines = [f"{'config':>8} {'BESS MW':>8} {'cost $':>12} {'saving $':>10} {'saving %':>9}"]
    for cfg, size, cost, s_abs, s_pct in compute_savings(result):
        lines.append(f"{cfg:>8} {size:8.0f} {cost:12.0f} {s_abs:10.0f} {s_pct:9.2f}")
    return "\n".join(lines)
