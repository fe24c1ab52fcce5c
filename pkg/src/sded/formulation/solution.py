"""Solver output mapped back to dispatch trajectories, with the cost breakdown."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import IndexMismatch
from ..grid import GridCase
from ..scenarios import ScenarioSet
from .build import ExtensiveForm, FormulationOptions
from .costs import CostParams, pwl_cost


@dataclass(eq=False)
class DispatchSolution:
    """First-stage arrays are (entity, T); scenario arrays are (entity, T, K).

    Regulation and scenario generator curtailment are stored for every
    generator (zero where the unit has no such variable).
    """

    generation: np.ndarray
    gen_curtail: np.ndarray
    wind_curtail: np.ndarray
    load_curtail: np.ndarray
    charge: np.ndarray
    discharge: np.ndarray
    gamma_ch: np.ndarray
    gamma_dis: np.ndarray
    soc: np.ndarray
    angles: np.ndarray
    flows: np.ndarray
    reg_up: np.ndarray
    reg_down: np.ndarray
    gen_curtail_s: np.ndarray
    wind_curtail_s: np.ndarray
    load_curtail_s: np.ndarray
    charge_s: np.ndarray
    discharge_s: np.ndarray
    gamma_ch_s: np.ndarray
    gamma_dis_s: np.ndarray
    soc_s: np.ndarray
    angles_s: np.ndarray
    flows_s: np.ndarray
    probs: np.ndarray
    demand: np.ndarray = None            # (T,) forecast system demand, MW
    available_wind: np.ndarray = None    # (T,) forecast wind, MW
    costs: dict = field(default_factory=dict)
    recourse: np.ndarray = None          # per-scenario second-stage cost
    objective: float = np.nan            # solver-reported objective
    status: str = ""
    gap: float = np.nan
    options: FormulationOptions = field(default_factory=FormulationOptions)

    @property
    def battery_dispatch(self) -> np.ndarray:
        """Discharge minus charge (negative while charging)."""
        return self.discharge - self.charge

    @property
    def n_steps(self) -> int:
        return self.generation.shape[1] if self.generation.ndim == 2 else self.soc.shape[1]

    def expected_wind_curtailment_mwh(self, dt_hours: float) -> float:
        if self.probs.size == 0:
            return 0.0
        return float(np.einsum("wtk,k->", self.wind_curtail_s, self.probs) * dt_hours)

    def first_stage_wind_curtailment_mwh(self, dt_hours: float) -> float:
        return float(self.wind_curtail.sum() * dt_hours)


def cost_breakdown(sol: DispatchSolution, case: GridCase, costs: CostParams) -> dict:
    """Recompute every cost component from the trajectories (no solver values used)."""
    dt = costs.dt_hours
    gen = sum(float(pwl_cost(g, sol.generation[i], costs.pwl_segments).sum())
              for i, g in enumerate(case.generators)) * dt
    quad = sum(float(g.cost(sol.generation[i]).sum()) for i, g in enumerate(case.generators)) * dt
    battery = dt * (costs.c_charge * sol.charge.sum() + costs.c_discharge * sol.discharge.sum())
    curtail = dt * (costs.c_gen_curtail * sol.gen_curtail.sum() + costs.c_load_curtail * sol.load_curtail.sum()
                    + costs.c_wind_curtail * sol.wind_curtail.sum())
    reg_price = np.array([costs.regulation_price(g) for g in case.generators]).reshape(-1, 1, 1)
    per_scenario = dt * (
        (reg_price * (sol.reg_up + sol.reg_down)).sum(axis=(0, 1))
        + costs.c_wind_curtail * sol.wind_curtail_s.sum(axis=(0, 1))
        + costs.c_charge * sol.charge_s.sum(axis=(0, 1))
        + costs.c_discharge * sol.discharge_s.sum(axis=(0, 1))
        + costs.c_load_curtail * sol.load_curtail_s.sum(axis=(0, 1))
        + costs.c_gen_curtail * sol.gen_curtail_s.sum(axis=(0, 1))
    )
    expected = float(per_scenario @ sol.probs) if sol.probs.size else 0.0
    return {
        "generation": gen,
        "generation_quadratic": quad,
        "battery": float(battery),
        "curtailment": float(curtail),
        "expected_recourse": expected,
        "total": gen + float(battery) + float(curtail) + expected,
        "_per_scenario": per_scenario,
    }


def extract_solution(raw, form: ExtensiveForm, case: GridCase, scen: ScenarioSet,
                     costs: CostParams = CostParams()) -> DispatchSolution:
    """Pull trajectories out of a solver vector (``raw.x``, or the vector itself)."""
    x = np.asarray(raw.x if hasattr(raw, "x") else raw, float)
    idx = form.index
    if x.ndim != 1 or x.size != idx.n_vars:
        raise IndexMismatch(f"solution has {x.size} values, index expects {idx.n_vars}")
    T, K = scen.n_steps, scen.n_scenarios
    G, W, N, B, L = (len(case.generators), len(case.wind_plants), len(case.buses),
                     len(case.storage_units), len(case.lines))
    get = lambda kind: x[idx.ids(kind)] if kind in idx else None

    def full_gen(kind, members):
        out = np.zeros((G, T, K))
        vals = get(kind)
        if vals is not None and len(members):
            out[members] = vals
        return out

    reg = [i for i, g in enumerate(case.generators) if g.provides_regulation]
    nonreg = [i for i, g in enumerate(case.generators) if not g.provides_regulation]
    second = lambda kind, n: get(kind) if K else np.zeros((n, T, 0))
    sol = DispatchSolution(
        generation=get("x"), gen_curtail=get("x_curt"), wind_curtail=get("u_curt"),
        load_curtail=get("d_curt"), charge=get("ch"), discharge=get("dis"),
        gamma_ch=get("g_ch"), gamma_dis=get("g_dis"), soc=get("soc"),
        angles=get("delta"), flows=get("flow"),
        reg_up=full_gen("reg_up", reg), reg_down=full_gen("reg_down", reg),
        gen_curtail_s=full_gen("x_curt_s", nonreg),
        wind_curtail_s=second("u_curt_s", W), load_curtail_s=second("d_curt_s", N),
        charge_s=second("ch_s", B), discharge_s=second("dis_s", B),
        gamma_ch_s=second("g_ch_s", B), gamma_dis_s=second("g_dis_s", B), soc_s=second("soc_s", B),
        angles_s=second("delta_s", N), flows_s=second("flow_s", L),
        probs=np.array(scen.probs, float),
        demand=scen.forecast_load.sum(axis=1), available_wind=scen.forecast_wind.sum(axis=1),
        objective=float(getattr(raw, "objective", np.nan)),
        status=str(getattr(raw, "status", "")),
        gap=float(getattr(raw, "gap", np.nan)),
        options=form.options,
    )
    breakdown = cost_breakdown(sol, case, costs)
    sol.recourse = breakdown.pop("_per_scenario")
    sol.costs = breakdown
    return sol
