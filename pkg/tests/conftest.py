from dataclasses import replace

import numpy as np
import pytest

from sded.formulation import CostParams, build_extensive_form
from sded.grid import (
    Bus, Generator, GridCase, Line, StorageUnit, WindPlant, bundled_case, bundled_case_path,
)
from sded.scenarios import ScenarioSet, build_scenario_paths, disaggregate_to_buses, load_percentile_forecasts

DATA = bundled_case_path("ieee39").parent
THREE_BUS_LOAD_LEVEL = 0.75
THREE_BUS_WIND_LEVEL = 0.625


def three_bus_scenarios(case=None, k=2, steps=2, seed=1, sigma=0.10):
    case = case or bundled_case("three_bus")
    lf = load_percentile_forecasts(DATA / "three_bus_load.csv")
    wf = load_percentile_forecasts(DATA / "three_bus_wind.csv")
    paths = build_scenario_paths(lf, wf, k, "rank", seed)
    scen = disaggregate_to_buses(paths, case, sigma, seed, THREE_BUS_LOAD_LEVEL, THREE_BUS_WIND_LEVEL)
    if steps < scen.n_steps:
        scen = ScenarioSet(scen.probs, scen.load[:, :steps], scen.wind[:, :steps], scen.forecast_load[:steps],
                           scen.forecast_wind[:steps], scen.bus_ids, scen.plant_ids, scen.seed)
    return scen


def three_bus_form(costs=CostParams(), **kw):
    case = bundled_case("three_bus")
    scen = three_bus_scenarios(case, **kw)
    return case, scen, build_extensive_form(case, scen, costs)


def random_fixture(rng, steps=2, k=2):
    """Perturbed 3-bus network with one battery and random scenarios."""
    demand = rng.uniform(20, 90, 3)
    buses = [Bus(1, demand[0], True), Bus(2, demand[1]), Bus(3, demand[2])]
    lines = [
        Line(1, 2, rng.uniform(5, 15), rng.uniform(60, 150)),
        Line(1, 3, rng.uniform(5, 15), rng.uniform(40, 120)),
        Line(2, 3, rng.uniform(5, 15), rng.uniform(60, 150)),
    ]
    gens = [
        Generator("G1", 1, 220.0, rng.uniform(5, 30), rng.uniform(0.001, 0.01), rng.uniform(10, 20),
                  100.0, rng.uniform(1, 4)),
        Generator("G2", 2, 160.0, rng.uniform(5, 20), rng.uniform(0.005, 0.02), rng.uniform(20, 35),
                  80.0, rng.uniform(1, 4), provides_regulation=bool(rng.integers(2))),
    ]
    wind = [WindPlant("W1", 3, rng.uniform(30, 90))]
    rating = rng.uniform(5, 30)
    store = [StorageUnit("B1", int(rng.integers(1, 4)), rating, rating * rng.uniform(0.5, 4))]
    case = GridCase(buses, lines, gens, wind, store)
    lm = rng.uniform(0.6, 1.1, (k, steps))
    wm = rng.uniform(0.0, 1.0, (k, steps))
    probs = rng.dirichlet(np.ones(k)) if k else np.zeros(0)
    probs = probs / probs.sum() if k else probs
    load = lm[..., None] * demand
    wmw = np.minimum(wm[..., None] * wind[0].capacity_mw, wind[0].capacity_mw)
    fl = np.outer(np.full(steps, 0.85), demand)
    fw = np.full((steps, 1), 0.5 * wind[0].capacity_mw)
    scen = ScenarioSet(probs, load, wmw, fl, fw, (1, 2, 3), ("W1",))
    return case, scen


@pytest.fixture
def three_bus():
    return bundled_case("three_bus")


@pytest.fixture
def ieee39():
    return bundled_case("ieee39")


@pytest.fixture
def single_bus():
    """One bus, one generator, flat 50 MW load, no network."""
    return GridCase([Bus(1, 50.0, True)], [], [Generator("G1", 1, 100.0, 10.0, 0.01, 20.0, 50.0, 5.0)])


def without_storage(case):
    return replace(case, storage_units=())


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
