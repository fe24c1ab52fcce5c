from dataclasses import replace

import numpy as np
import pytest

from conftest import random_fixture, three_bus_form, three_bus_scenarios, without_storage
from sded.errors import DimensionMismatch, EmptyHorizon, IndexMismatch
from sded.formulation import (
    FAMILIES, CostParams, FormulationOptions, build_extensive_form, extract_solution, pwl_breakpoints,
    pwl_cost, verify_solution,
)
from sded.formulation.index import SECOND_STAGE_KINDS
from sded.grid import (
    PENETRATION_CONFIGS, Bus, Generator, GridCase, Line, StorageUnit, apply_wind_conversion,
    attach_storage, storage_at,
)
from sded.milp import branch_and_bound, highs_milp_solve
from sded.scenarios import ScenarioSet, deterministic_scenarios


def solved(case, scen, costs=CostParams(), options=FormulationOptions()):
    form = build_extensive_form(case, scen, costs, options)
    raw = branch_and_bound(form.model)
    return form, raw, extract_solution(raw, form, case, scen, costs)


def zero_solution(case, scen, costs=CostParams()):
    form = build_extensive_form(case, scen, costs)
    return extract_solution(np.zeros(form.model.n_vars), form, case, scen, costs)


def flat_scenarios(case, load_mw, steps, k=1):
    fl = np.tile([b.demand_mw for b in case.buses], (steps, 1)) * (load_mw / case.total_demand_mw)
    fw = np.zeros((steps, len(case.wind_plants)))
    return ScenarioSet(np.full(k, 1.0 / k) if k else np.zeros(0), np.repeat(fl[None], k, 0),
                       np.repeat(fw[None], k, 0), fl, fw, tuple(b.id for b in case.buses),
                       tuple(w.id for w in case.wind_plants))


# -- cost pieces ------------------------------------------------------------------------


def test_g1_one_interval_cost(ieee39):
    g1 = ieee39.generator("G1")
    assert 0.25 * g1.cost(400.0) == pytest.approx(1888.2)
    assert 0.25 * pwl_cost(g1, 400.0, 32) == pytest.approx(1888.2, rel=1e-3)


def test_pwl_is_exact_at_breakpoints_and_above_between(ieee39):
    for g in ieee39.generators:
        bp, val = pwl_breakpoints(g, 8)
        assert np.allclose(pwl_cost(g, bp, 8), g.cost(bp))
        mid = (bp[:-1] + bp[1:]) / 2
        assert np.all(pwl_cost(g, mid, 8) >= g.cost(mid) - 1e-9)


def test_cost_params():
    costs = CostParams()
    assert (costs.c_wind_curtail, costs.c_load_curtail, costs.c_gen_curtail) == (100, 3000, 400)
    g = Generator("G", 1, 10, 0, 0, 20.0, 0, 1)
    assert costs.regulation_price(g) == 30.0
    assert costs.scaled(2).c_charge == 20 and costs.scaled(2).dt_hours == 0.25
    for bad in ({"dt_hours": 0}, {"pwl_segments": 0}, {"c_charge": -1}):
        with pytest.raises(ValueError):
            CostParams(**bad)


# -- model shape -----------------------------------------------------------------------


def test_ieee39_binary_count(ieee39):
    case = attach_storage(apply_wind_conversion(ieee39, PENETRATION_CONFIGS["20%"]), storage_at([21, 28], 20))
    steps, k = 8, 50
    rng = np.random.default_rng(0)
    fl = np.tile([b.demand_mw for b in case.buses], (steps, 1)) * 0.7
    fw = np.tile([w.capacity_mw for w in case.wind_plants], (steps, 1)) * 0.3
    scen = ScenarioSet(np.full(k, 1 / k), fl * rng.uniform(0.9, 1.1, (k, steps, 1)), np.repeat(fw[None], k, 0),
                       fl, fw, tuple(case.bus_ids), tuple(w.id for w in case.wind_plants))
    form = build_extensive_form(case, scen)
    assert form.model.n_binaries == 2 * 8 * 2 * (1 + 50) == 1632
    form.index.check_covers(form.model.n_vars)


def test_zero_scenarios_is_first_stage_only(three_bus):
    scen = deterministic_scenarios(three_bus, [0.8, 0.9], [0.5, 0.5])
    form = build_extensive_form(three_bus, scen)
    assert not any(kind in form.index for kind in SECOND_STAGE_KINDS)
    _, raw, sol = solved(three_bus, scen)
    assert sol.costs["expected_recourse"] == 0
    assert verify_solution(sol, three_bus, scen).passed


def test_single_bus_dispatch_follows_load(single_bus):
    scen = flat_scenarios(single_bus, 50.0, 4)
    _, raw, sol = solved(single_bus, scen)
    assert np.allclose(sol.generation, 50.0)
    for arr in (sol.gen_curtail, sol.load_curtail, sol.reg_up, sol.reg_down, sol.load_curtail_s):
        assert np.allclose(arr, 0.0, atol=1e-9)


def test_variable_index_is_bijective():
    case, scen, form = three_bus_form()
    idx = form.index
    idx.check_covers(form.model.n_vars)
    for col in range(idx.n_vars):
        kind, *key = idx.identity(col)
        assert idx.column(kind, *key) == col
    assert idx.column("soc_s", "B1", 1, 0) == idx.ids("soc_s")[0, 1, 0]
    with pytest.raises(IndexMismatch):
        idx.column("x", "G9", 0)
    with pytest.raises(IndexMismatch):
        idx.ids("nope")


def test_dimension_errors(three_bus):
    scen = three_bus_scenarios(three_bus)
    with pytest.raises(DimensionMismatch):
        build_extensive_form(apply_wind_conversion(three_bus, ["G2"]), scen)
    empty = ScenarioSet([], np.zeros((0, 0, 3)), np.zeros((0, 0, 1)), np.zeros((0, 3)), np.zeros((0, 1)),
                        (1, 2, 3), ("W1",))
    with pytest.raises(EmptyHorizon):
        build_extensive_form(three_bus, empty)


# -- extraction ------------------------------------------------------------------------


def test_zero_solution_on_zero_load_case():
    case = GridCase([Bus(1, 0.0, True), Bus(2, 0.0)], [Line(1, 2, 10, 50)],
                    [Generator("G1", 1, 100, 0, 0, 10, 0, 1)], storage_units=[StorageUnit("B", 2, 10, 20)])
    scen = ScenarioSet([1.0], np.zeros((1, 2, 2)), np.zeros((1, 2, 0)), np.zeros((2, 2)), np.zeros((2, 0)),
                       (1, 2), ())
    sol = zero_solution(case, scen)
    for arr in (sol.generation, sol.flows, sol.angles, sol.charge, sol.soc, sol.flows_s, sol.reg_up):
        assert not np.any(arr)


def test_cost_breakdown_matches_objective():
    case, scen, form = three_bus_form()
    raw = branch_and_bound(form.model)
    sol = extract_solution(raw, form, case, scen)
    parts = sol.costs
    assert parts["total"] == pytest.approx(raw.objective, rel=1e-6)
    assert parts["total"] == pytest.approx(
        parts["generation"] + parts["battery"] + parts["curtailment"] + parts["expected_recourse"], rel=1e-12)
    assert sol.recourse @ sol.probs == pytest.approx(parts["expected_recourse"])


def test_wrong_length_vector_is_rejected():
    case, scen, form = three_bus_form()
    with pytest.raises(IndexMismatch):
        extract_solution(np.zeros(form.model.n_vars + 1), form, case, scen)


def test_battery_sign_convention():
    case, scen, form = three_bus_form()
    sol = zero_solution(case, scen)
    sol.charge[0, 0] = 40.0
    assert sol.battery_dispatch[0, 0] == -40.0


# -- replay ----------------------------------------------------------------------------


def storage_case(eta):
    return GridCase([Bus(1, 0.0, True)], [], [Generator("G1", 1, 100, 0, 0, 10, 0, 10)],
                    storage_units=[StorageUnit("B", 1, 20.0, 80.0, eta_ch=eta, eta_dis=eta)])


@pytest.mark.parametrize("eta, expected", [(1.0, 0.5625), (0.95, 0.559375)])
def test_soc_recursion_hand_values(eta, expected):
    case = storage_case(eta)
    scen = deterministic_scenarios(case, [1.0])
    sol = zero_solution(case, scen)
    sol.charge[0, 0], sol.gamma_ch[0, 0], sol.soc[0, 0] = 20.0, 1.0, expected
    sol.generation[0, 0] = 20.0
    rep = verify_solution(sol, case, scen)
    assert rep.residuals["soc_recursion"] == pytest.approx(0.0, abs=1e-15)
    assert rep.passed


def test_soc_violation_of_one_mwh():
    case = storage_case(1.0)
    scen = deterministic_scenarios(case, [1.0])
    sol = zero_solution(case, scen)
    sol.soc[0, 0] = 0.5 + 1.0 / 80.0
    rep = verify_solution(sol, case, scen)
    assert rep.residuals["soc_recursion"] == pytest.approx(1 / 80)
    assert "soc_recursion" in rep.failures()


def test_simultaneous_charge_and_discharge_is_flagged():
    case = storage_case(1.0)
    scen = deterministic_scenarios(case, [1.0])
    sol = zero_solution(case, scen)
    sol.charge[0, 0] = sol.discharge[0, 0] = 5.0
    sol.gamma_ch[0, 0] = sol.gamma_dis[0, 0] = 1.0
    rep = verify_solution(sol, case, scen)
    assert rep.residuals["complementarity"] >= 1.0
    assert not rep.passed and "complementarity" in str(rep)


def test_dc_flow_definition():
    case = GridCase([Bus(1, 0.0, True), Bus(2, 0.0)], [Line(1, 2, 10.0, 5.0)],
                    [Generator("G1", 1, 10, 0, 0, 10, 0, 1)], base_mva=1.0)
    scen = deterministic_scenarios(case, [1.0])
    sol = zero_solution(case, scen)
    sol.angles[:, 0] = [0.1, 0.05]
    sol.flows[0, 0] = 0.5
    rep = verify_solution(sol, case, scen)
    assert rep.residuals["flow_definition"] == pytest.approx(0.0, abs=1e-15)
    sol.flows[0, 0] = 0.4
    assert verify_solution(sol, case, scen).residuals["flow_definition"] == pytest.approx(0.1)


def test_every_family_reported():
    case, scen, form = three_bus_form()
    sol = extract_solution(branch_and_bound(form.model), form, case, scen)
    rep = verify_solution(sol, case, scen)
    assert tuple(rep.residuals) == FAMILIES and len(FAMILIES) == 30
    assert rep.max_residual <= 1e-6
    assert not ((sol.charge_s > 1e-6) & (sol.discharge_s > 1e-6)).any()
    assert np.all(sol.gamma_ch_s + sol.gamma_dis_s <= 1 + 1e-9)


def test_ramp_anchor_and_terminal_soc():
    case, scen, _ = three_bus_form()
    opts = FormulationOptions(terminal_soc=True, initial_dispatch={"G1": 60.0, "G2": 40.0})
    form, raw, sol = solved(case, scen, options=opts)
    assert verify_solution(sol, case, scen).passed
    assert abs(sol.generation[0, 0] - 60.0) <= case.generators[0].ramp_limit(0.25) + 1e-9
    assert sol.soc[0, -1] >= case.storage_units[0].soc_init - 1e-9
    sol.generation[0, 0] = 60.0 + case.generators[0].ramp_limit(0.25) + 1.0
    assert verify_solution(sol, case, scen).residuals["ramping"] >= 1.0 - 1e-9


def test_reference_bus_override_keeps_objective():
    case, scen, form = three_bus_form()
    base = branch_and_bound(form.model).objective
    moved = build_extensive_form(case, scen, options=FormulationOptions(reference_bus=3))
    assert branch_and_bound(moved.model).objective == pytest.approx(base, rel=1e-7)


def test_non_regulating_unit_uses_scenario_curtailment():
    case, scen, _ = three_bus_form()
    case = replace(case, generators=(case.generators[0], replace(case.generators[1], provides_regulation=False)))
    form, raw, sol = solved(case, scen)
    assert verify_solution(sol, case, scen).passed
    assert not sol.reg_up[1].any() and not sol.reg_down[1].any()


@pytest.mark.parametrize("seed", range(4))
def test_more_storage_never_costs_more(seed):
    rng = np.random.default_rng(seed)
    case, scen = random_fixture(rng, 2, 2)
    objs = []
    for factor in (0.0, 0.5, 1.0, 2.0):
        if factor == 0.0:
            c = without_storage(case)
        else:
            u = case.storage_units[0]
            c = replace(case, storage_units=(replace(u, rating_mw=u.rating_mw * factor,
                                                     energy_cap_mwh=u.energy_mwh * factor),))
        objs.append(highs_milp_solve(build_extensive_form(c, scen).model, rel_gap=1e-9).objective)
    assert all(b <= a * (1 + 1e-7) + 1e-7 for a, b in zip(objs, objs[1:]))
