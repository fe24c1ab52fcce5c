import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sded.errors import HorizonMismatch, IoError, NonMonotonePercentiles, ParseError
from sded.scenarios import (
    DiscretePdf, PercentileForecast, ScenarioSet, build_discrete_pdf, build_scenario_paths,
    deterministic_scenarios, disaggregate_to_buses, load_percentile_forecasts, noise_draws,
    paths_from_pdfs, read_scenarios_csv, stratify, write_scenarios_csv,
)

from conftest import DATA

EXAMPLE = DiscretePdf(np.array([0.8, 0.9, 1.0, 1.1]), np.array([0.2, 0.3, 0.3, 0.2]))


def write_forecast(path, rows):
    stamps = [f"2018-01-04T15:{15 * i:02d}:00Z" for i in range(len(rows))]
    header = "timestamp," + ",".join(f"p{i}" for i in range(1, 100))
    lines = [header] + [s + "," + ",".join(repr(float(v)) for v in r) for s, r in zip(stamps, rows)]
    path.write_text("\n".join(lines) + "\n")
    return path


def test_stratify_worked_example():
    got = stratify(EXAMPLE, 2)
    assert [p for _, p in got] == [0.5, 0.5]
    assert np.allclose([v for v, _ in got], [0.86, 1.04], rtol=0, atol=1e-12)
    assert sum(v * p for v, p in got) == pytest.approx(0.95, abs=1e-12)


def test_stratify_single_stratum_is_mean():
    (v, p), = stratify(EXAMPLE, 1)
    assert p == 1.0 and v == pytest.approx(EXAMPLE.mean, abs=1e-12)


def test_stratify_degenerate_pdf():
    assert stratify(DiscretePdf(np.array([1.0]), np.array([1.0])), 5) == [(1.0, 0.2)] * 5


def test_stratify_rejects_zero_strata():
    with pytest.raises(ValueError):
        stratify(EXAMPLE, 0)


@st.composite
def pdfs(draw):
    n = draw(st.integers(1, 30))
    support = np.unique(draw(st.lists(st.floats(0, 3, allow_nan=False), min_size=n, max_size=n)))
    weights = np.array(draw(st.lists(st.floats(0.01, 1), min_size=support.size, max_size=support.size)))
    return DiscretePdf(support, weights / weights.sum())


@settings(max_examples=200, deadline=None)
@given(pdfs(), st.integers(1, 80))
def test_stratify_preserves_mean_and_order(pdf, k):
    got = stratify(pdf, k)
    values = np.array([v for v, _ in got])
    assert len(got) == k and all(p == 1.0 / k for _, p in got)
    assert abs(values.mean() - pdf.mean) <= 1e-9
    assert np.all(np.diff(values) >= -1e-12)
    assert values.min() >= pdf.support[0] - 1e-12 and values.max() <= pdf.support[-1] + 1e-12


def test_discrete_pdf_from_percentiles():
    pdf = build_discrete_pdf(np.repeat([0.9, 1.0, 1.1], 33))
    assert np.allclose(pdf.probs, 1 / 3)
    flat = build_discrete_pdf(np.full(99, 0.7))
    assert flat.support.tolist() == [0.7] and flat.probs.tolist() == [1.0]
    distinct = build_discrete_pdf(np.arange(1, 100) / 50)
    assert distinct.support.size == 99 and np.allclose(distinct.probs, 1 / 99)


def test_discrete_pdf_validation():
    with pytest.raises(ValueError):
        DiscretePdf(np.array([1.0, 0.5]), np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        DiscretePdf(np.array([1.0, 2.0]), np.array([0.5, 0.6]))


def test_load_bundled_forecast():
    fc = load_percentile_forecasts(DATA / "ercot_west_load.csv")
    assert fc.n_steps == 8 and fc.series_kind == "load"
    assert fc.median.mean() == pytest.approx(1.0)
    assert fc.scale == pytest.approx(4220.4625)
    assert load_percentile_forecasts(DATA / "ercot_west_wind.csv").series_kind == "wind"


def test_forecast_errors(tmp_path):
    with pytest.raises(IoError, match="nope.csv"):
        load_percentile_forecasts(tmp_path / "nope.csv")
    row = np.linspace(0.9, 1.1, 99)
    bad = row.copy()
    bad[39], bad[59] = 1.2, 1.0  # p40 > p60
    with pytest.raises(NonMonotonePercentiles):
        load_percentile_forecasts(write_forecast(tmp_path / "bad.csv", [row, bad]))
    (tmp_path / "hdr.csv").write_text("time,p1\n")
    with pytest.raises(ParseError):
        load_percentile_forecasts(tmp_path / "hdr.csv")


def test_degenerate_forecast_gives_constant_paths(tmp_path):
    fc = load_percentile_forecasts(write_forecast(tmp_path / "flat_load.csv", [np.ones(99)] * 3))
    paths = build_scenario_paths(fc, fc, 4)
    assert np.all(paths.load_path == 1.0) and np.all(paths.wind_path == 1.0)


def test_paths_per_timestep_stratify():
    load, wind = paths_from_pdfs([EXAMPLE] * 3, [EXAMPLE] * 3, 2)
    assert np.allclose(load[0], 0.86, atol=1e-12) and np.allclose(load[1], 1.04, atol=1e-12)


def test_fifty_paths_rank_ordered():
    lf = load_percentile_forecasts(DATA / "ercot_west_load.csv")
    wf = load_percentile_forecasts(DATA / "ercot_west_wind.csv")
    paths = build_scenario_paths(lf, wf, 50)
    assert paths.n_scenarios == 50 and np.allclose(paths.probs, 0.02)
    assert abs(paths.probs.sum() - 1) <= 1e-12
    assert np.all(np.diff(paths.load_path, axis=0) >= 0)
    assert np.all(np.diff(paths.wind_path, axis=0) >= 0)


def test_independent_pair_permutes_wind_only():
    lf = load_percentile_forecasts(DATA / "ercot_west_load.csv")
    wf = load_percentile_forecasts(DATA / "ercot_west_wind.csv")
    rank = build_scenario_paths(lf, wf, 10)
    pair = build_scenario_paths(lf, wf, 10, "independent-pair", seed=3)
    assert np.array_equal(rank.load_path, pair.load_path)
    assert sorted(map(tuple, pair.wind_path)) == sorted(map(tuple, rank.wind_path))
    assert not np.array_equal(rank.wind_path, pair.wind_path)


def test_horizon_mismatch(tmp_path):
    a = load_percentile_forecasts(write_forecast(tmp_path / "a_load.csv", [np.ones(99)] * 3))
    b = load_percentile_forecasts(write_forecast(tmp_path / "b_wind.csv", [np.ones(99)] * 2))
    with pytest.raises(HorizonMismatch):
        build_scenario_paths(a, b, 2)


def test_disaggregation_without_noise(three_bus):
    lf = load_percentile_forecasts(DATA / "three_bus_load.csv")
    wf = load_percentile_forecasts(DATA / "three_bus_wind.csv")
    paths = build_scenario_paths(lf, wf, 3)
    scen = disaggregate_to_buses(paths, three_bus, 0.0)
    demand = np.array([b.demand_mw for b in three_bus.buses])
    assert np.array_equal(scen.load, paths.load_path[..., None] * demand)
    assert np.allclose(scen.forecast_load.sum(axis=1), lf.median * demand.sum())


def test_disaggregation_is_seeded(three_bus):
    lf = load_percentile_forecasts(DATA / "three_bus_load.csv")
    wf = load_percentile_forecasts(DATA / "three_bus_wind.csv")
    paths = build_scenario_paths(lf, wf, 4)
    a = disaggregate_to_buses(paths, three_bus, 0.1, seed=11)
    assert a.same_as(disaggregate_to_buses(paths, three_bus, 0.1, seed=11))
    assert not a.same_as(disaggregate_to_buses(paths, three_bus, 0.1, seed=12))
    assert np.all(a.wind <= 60.0) and np.all(a.load >= 0)


def test_renormalized_noise_keeps_system_total(three_bus):
    lf = load_percentile_forecasts(DATA / "three_bus_load.csv")
    paths = build_scenario_paths(lf, lf, 3)
    scen = disaggregate_to_buses(paths, three_bus, 0.1, seed=5, renormalize=True)
    assert np.allclose(scen.load.sum(axis=2), paths.load_path * three_bus.total_demand_mw)


def test_noise_statistics():
    eps = np.concatenate([noise_draws(1, "wind", k, t, 500, 0.1) for k in range(4) for t in range(5)])
    assert abs(eps.std() - 0.1) / 0.1 < 0.02
    assert eps.min() >= -1
    assert np.array_equal(noise_draws(1, "load", 3, 2, 7, 0.1), noise_draws(1, "load", 3, 2, 7, 0.1))
    assert not np.array_equal(noise_draws(1, "load", 3, 2, 7, 0.1), noise_draws(1, "wind", 3, 2, 7, 0.1))


def test_truncation_keeps_loads_nonnegative():
    assert noise_draws(0, "load", 0, 0, 10_000, 2.0).min() == -1.0


def test_scenario_csv_round_trip(tmp_path, three_bus):
    lf = load_percentile_forecasts(DATA / "three_bus_load.csv")
    wf = load_percentile_forecasts(DATA / "three_bus_wind.csv")
    scen = disaggregate_to_buses(build_scenario_paths(lf, wf, 3), three_bus, 0.1, seed=2)
    write_scenarios_csv(scen, tmp_path / "s.csv")
    assert read_scenarios_csv(tmp_path / "s.csv").same_as(scen)


def test_scenario_set_invariants():
    with pytest.raises(ValueError):
        ScenarioSet([0.5, 0.4], np.ones((2, 1, 1)), np.ones((2, 1, 0)), np.ones((1, 1)), np.ones((1, 0)), (1,), ())
    with pytest.raises(ValueError):
        ScenarioSet([1.0], -np.ones((1, 1, 1)), np.ones((1, 1, 0)), np.ones((1, 1)), np.ones((1, 0)), (1,), ())


def test_deterministic_set_has_no_scenarios(three_bus):
    scen = deterministic_scenarios(three_bus, [1.0, 0.9])
    assert scen.n_scenarios == 0 and scen.n_steps == 2
    assert scen.forecast_load[1].sum() == pytest.approx(180.0)


def test_forecast_type_checks():
    with pytest.raises(ParseError):
        PercentileForecast(("a",), "load", np.ones((1, 98)))
    with pytest.raises(HorizonMismatch):
        PercentileForecast(("a", "b"), "load", np.ones((1, 99)))
