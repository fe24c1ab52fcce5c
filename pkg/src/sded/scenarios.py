"""Percentile forecasts to probability-weighted, bus-level wind and load scenarios.

Pipeline: percentile CSV -> normalized multipliers -> per-timestep discrete
PDF -> k equal-mass strata averaged into representatives -> system-level
scenario paths -> bus/plant MW values with seeded Gaussian spatial noise.

Noise streams are keyed by ``(seed, kind, scenario, timestep)`` through
``numpy.random.SeedSequence`` feeding PCG64, so each scenario can be drawn
independently (and in any order) with the same result.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import HorizonMismatch, IoError, NonMonotonePercentiles, ParseError
from .grid import GridCase

N_PERCENTILES = 99
LOAD, WIND = "load", "wind"
RANK, INDEPENDENT_PAIR = "rank", "independent-pair"
COUPLINGS = (RANK, INDEPENDENT_PAIR)
_KIND_CODE = {LOAD: 0, WIND: 1}


@dataclass(frozen=True, eq=False)
class PercentileForecast:
    """Per-timestep p1..p99 multipliers, normalized so the p50 path averages 1.

    ``scale`` is the raw-unit value that corresponds to multiplier 1.
    """

    horizon: tuple
    series_kind: str
    values: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] != N_PERCENTILES:
            raise ParseError(f"expected {N_PERCENTILES} percentile columns, got shape {v.shape}")
        if len(self.horizon) != v.shape[0]:
            raise HorizonMismatch("horizon length differs from the number of percentile rows")
        if np.any(v < 0):
            raise ParseError("percentile values must be nonnegative")
        for t in range(v.shape[0]):
            drops = np.flatnonzero(np.diff(v[t]) < 0)
            if drops.size:
                i = int(drops[0])
                raise NonMonotonePercentiles(self.horizon[t], f"p{i + 1}={v[t, i]} > p{i + 2}={v[t, i + 1]}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "horizon", tuple(self.horizon))

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    @property
    def median(self) -> np.ndarray:
        return self.values[:, 49]


def _parse_stamp(text: str):
    text = text.strip()
    try:
        return datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        return float(text)


def load_percentile_forecasts(path, series_kind: str | None = None) -> PercentileForecast:
    """Read a ``timestamp,p1..p99`` CSV and normalize it to p50 mean 1.

    ``series_kind`` defaults to ``wind`` when the file name mentions wind.
    """
    path = Path(path)
    if series_kind is None:
        series_kind = WIND if "wind" in path.name.lower() else LOAD
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoError(f"cannot read forecast file {path}: {exc}") from None
    if not rows:
        raise ParseError(f"{path}: empty forecast file")
    header = [h.strip() for h in rows[0]]
    wanted = ["timestamp"] + [f"p{i}" for i in range(1, N_PERCENTILES + 1)]
    if header != wanted:
        missing = [h for h in wanted if h not in header]
        raise ParseError(f"{path}: header must be timestamp,p1..p99 (missing {missing[:3]})")
    stamps, values = [], []
    for lineno, row in enumerate(rows[1:], 2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(wanted):
            raise ParseError(f"{path}:{lineno}: expected {len(wanted)} fields, got {len(row)}")
        try:
            stamps.append(_parse_stamp(row[0]))
            values.append([float(c) for c in row[1:]])
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from None
    try:
        increasing = all(a < b for a, b in zip(stamps, stamps[1:]))
    except TypeError:
        raise ParseError(f"{path}: timestamps mix dates and numbers") from None
    if not increasing:
        raise ParseError(f"{path}: timestamps must be strictly increasing")
    raw = np.array(values, dtype=float).reshape(-1, N_PERCENTILES)
    if not np.all(np.isfinite(raw)):
        raise ParseError(f"{path}: non-finite percentile value")
    scale = float(raw[:, 49].mean()) if raw.size else 1.0
    if scale <= 0:
        scale = 1.0
    horizon = tuple(s.strftime("%Y-%m-%dT%H:%M:%SZ") if isinstance(s, datetime) else s for s in stamps)
    return PercentileForecast(horizon, series_kind, raw / scale, scale)


@dataclass(frozen=True, eq=False)
class DiscretePdf:
    support: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.support, float)
        p = np.asarray(self.probs, float)
        if s.shape != p.shape or s.ndim != 1 or s.size == 0:
            raise ValueError("support and probs must be matching nonempty vectors")
        if np.any(np.diff(s) <= 0):
            raise ValueError("support must be strictly increasing")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must be nonnegative and sum to 1")
        object.__setattr__(self, "support", s)
        object.__setattr__(self, "probs", p)

    @property
    def mean(self) -> float:
        return float(self.support @ self.probs)


def build_discrete_pdf(percentiles) -> DiscretePdf:
    """Each percentile point carries mass 1/99; equal values pool their mass."""
    v = np.asarray(percentiles, dtype=float)
    if np.any(np.diff(v) < 0):
        raise NonMonotonePercentiles("?", "input vector decreases")
    support, counts = np.unique(v, return_counts=True)
    return DiscretePdf(support, counts / v.size)


def stratify(pdf: DiscretePdf, k: int) -> list:
    """Split the CDF into k equal-mass segments; return (mean value, 1/k) per segment."""
    if int(k) < 1:
        raise ValueError("number of strata must be at least 1")
    k = int(k)
    reps = _kernels.stratify_kernel(pdf.support, pdf.probs, k)
    return [(float(r), 1.0 / k) for r in reps]


def _representatives(pdf: DiscretePdf, k: int) -> np.ndarray:
    return np.asarray(_kernels.stratify_kernel(pdf.support, pdf.probs, int(k)))


@dataclass(frozen=True, eq=False)
class SystemScenarioSet:
    probs: np.ndarray
    load_path: np.ndarray  # (K, T) multipliers
    wind_path: np.ndarray
    load_median: np.ndarray  # (T,) p50 multipliers, used for the forecast fields
    wind_median: np.ndarray
    coupling: str = RANK

    @property
    def n_scenarios(self) -> int:
        return len(self.probs)

    @property
    def n_steps(self) -> int:
        return self.load_path.shape[1]


def paths_from_pdfs(load_pdfs: Sequence[DiscretePdf], wind_pdfs: Sequence[DiscretePdf], k: int,
                    coupling: str = RANK, seed: int = 0) -> tuple:
    """Stratify each timestep's PDFs and chain stratum i across time into path i."""
    if len(load_pdfs) != len(wind_pdfs):
        raise HorizonMismatch(f"load horizon has {len(load_pdfs)} steps, wind has {len(wind_pdfs)}")
    if coupling not in COUPLINGS:
        raise ValueError(f"coupling must be one of {COUPLINGS}")
    T = len(load_pdfs)
    load = np.array([_representatives(p, k) for p in load_pdfs]).T.reshape(k, T)
    wind = np.array([_representatives(p, k) for p in wind_pdfs]).T.reshape(k, T)
    if coupling == INDEPENDENT_PAIR:
        wind = wind[np.random.default_rng(seed).permutation(k)]
    return load, wind


def build_scenario_paths(load_fc: PercentileForecast, wind_fc: PercentileForecast, k: int,
                         coupling: str = RANK, seed: int = 0) -> SystemScenarioSet:
    if load_fc.horizon != wind_fc.horizon:
        raise HorizonMismatch(
            f"load forecast has {load_fc.n_steps} steps, wind forecast has {wind_fc.n_steps}"
            if load_fc.n_steps != wind_fc.n_steps else "load and wind timestamps differ"
        )
    k = int(k)
    if k < 1:
        raise ValueError("number of scenarios must be at least 1")
    load, wind = paths_from_pdfs(
        [build_discrete_pdf(row) for row in load_fc.values],
        [build_discrete_pdf(row) for row in wind_fc.values],
        k, coupling, seed,
    )
    return SystemScenarioSet(np.full(k, 1.0 / k), load, wind,
                             load_fc.median.copy(), wind_fc.median.copy(), coupling)


@dataclass(frozen=True, eq=False)
class ScenarioSet:
    """Bus-level scenarios in MW. Arrays are (K, T, bus) and (K, T, plant).

    ``K = 0`` is allowed and describes a purely deterministic dispatch.
    """

    probs: np.ndarray
    load: np.ndarray
    wind: np.ndarray
    forecast_load: np.ndarray
    forecast_wind: np.ndarray
    bus_ids: tuple
    plant_ids: tuple
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        f = lambda a: np.array(a, dtype=float)
        probs, load, wind = f(self.probs), f(self.load), f(self.wind)
        fl, fw = f(self.forecast_load), f(self.forecast_wind)
        T, N, W, K = fl.shape[0], len(self.bus_ids), len(self.plant_ids), probs.size
        load = load.reshape(K, T, N)
        wind = wind.reshape(K, T, W)
        fw = fw.reshape(T, W)
        if fl.shape != (T, N):
            raise HorizonMismatch(f"forecast_load shape {fl.shape} does not match ({T}, {N})")
        if K and abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("scenario probabilities must sum to 1")
        for name, a in (("probs", probs), ("load", load), ("wind", wind), ("forecast_load", fl), ("forecast_wind", fw)):
            if np.any(a < 0) or not np.all(np.isfinite(a)):
                raise ValueError(f"{name} must be finite and nonnegative")
            a.setflags(write=False)
        for k, v in (("probs", probs), ("load", load), ("wind", wind), ("forecast_load", fl), ("forecast_wind", fw)):
            object.__setattr__(self, k, v)
        object.__setattr__(self, "bus_ids", tuple(self.bus_ids))
        object.__setattr__(self, "plant_ids", tuple(self.plant_ids))

    @property
    def n_scenarios(self) -> int:
        return self.probs.size

    @property
    def n_steps(self) -> int:
        return self.forecast_load.shape[0]

    def same_as(self, other: "ScenarioSet") -> bool:
        arrays = ("probs", "load", "wind", "forecast_load", "forecast_wind")
        return (
            self.bus_ids == other.bus_ids and self.plant_ids == other.plant_ids
            and all(np.array_equal(getattr(self, a), getattr(other, a)) for a in arrays)
        )


def noise_draws(seed: int, kind: str, scenario: int, t: int, n: int, sigma: float) -> np.ndarray:
    """Spatial noise for one (kind, scenario, timestep): n draws of N(0, sigma) truncated at -1."""
    if sigma == 0 or n == 0:
        return np.zeros(n)
    ss = np.random.SeedSequence([int(seed), _KIND_CODE[kind], int(scenario), int(t)])
    eps = np.random.Generator(np.random.PCG64(ss)).normal(0.0, sigma, n)
    return np.maximum(eps, -1.0)


def disaggregate_to_buses(sys: SystemScenarioSet, case: GridCase, noise_sigma: float = 0.10,
                          seed: int = 0, load_level: float = 1.0, wind_level: float = 1.0,
                          renormalize: bool = False) -> ScenarioSet:
    """Spread system multipliers over buses and wind plants with seeded noise.

    ``load_level``/``wind_level`` rescale the nominal bus demand and plant
    capacity that multiplier 1 refers to. With ``renormalize`` the noisy bus
    loads (and plant outputs) of each scenario step are rescaled to the
    noise-free system total.
    """
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be nonnegative")
    demand = np.array([b.demand_mw for b in case.buses]) * load_level
    cap = np.array([w.capacity_mw for w in case.wind_plants], dtype=float)
    K, T = sys.n_scenarios, sys.n_steps
    N, W = demand.size, cap.size
    load = np.empty((K, T, N))
    wind = np.empty((K, T, W))
    for k in range(K):
        for t in range(T):
            base_l = demand * sys.load_path[k, t]
            noisy = base_l * (1.0 + noise_draws(seed, LOAD, k, t, N, noise_sigma))
            if renormalize and noisy.sum() > 0:
                noisy *= base_l.sum() / noisy.sum()
            load[k, t] = noisy
            base_w = cap * wind_level * sys.wind_path[k, t]
            noisy = base_w * (1.0 + noise_draws(seed, WIND, k, t, W, noise_sigma))
            if renormalize and noisy.sum() > 0:
                noisy *= base_w.sum() / noisy.sum()
            wind[k, t] = np.clip(noisy, 0.0, cap)
    forecast_load = np.outer(sys.load_median, demand)
    forecast_wind = np.clip(np.outer(sys.wind_median, cap * wind_level), 0.0, cap)
    return ScenarioSet(
        sys.probs, load, wind, forecast_load, forecast_wind,
        tuple(b.id for b in case.buses), tuple(w.id for w in case.wind_plants), seed,
        {"noise_sigma": noise_sigma, "coupling": sys.coupling, "load_level": load_level,
         "wind_level": wind_level, "renormalize": renormalize},
    )


def deterministic_scenarios(case: GridCase, load_multipliers, wind_multipliers=None,
                            load_level: float = 1.0, wind_level: float = 1.0) -> ScenarioSet:
    """Forecast-only set (K = 0) from per-step system multipliers."""
    lm = np.asarray(load_multipliers, float)
    wm = np.ones_like(lm) if wind_multipliers is None else np.asarray(wind_multipliers, float)
    demand = np.array([b.demand_mw for b in case.buses]) * load_level
    cap = np.array([w.capacity_mw for w in case.wind_plants], dtype=float)
    T = lm.size
    return ScenarioSet(
        np.zeros(0), np.zeros((0, T, demand.size)), np.zeros((0, T, cap.size)),
        np.outer(lm, demand), np.clip(np.outer(wm, cap * wind_level), 0.0, cap),
        tuple(b.id for b in case.buses), tuple(w.id for w in case.wind_plants),
    )


# -- scenario CSV ---------------------------------------------------------------------

SCENARIO_HEADER = ["scenario", "prob", "t", "entity_kind", "entity_id", "value_mw"]
FORECAST_TAG = "forecast"


def write_scenarios_csv(scen: ScenarioSet, path) -> None:
    """Long-format export; forecast rows carry scenario ``forecast`` and an empty prob.

    Values are written with ``repr`` so re-reading reproduces them bit for bit.
    """
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SCENARIO_HEADER)
            for t in range(scen.n_steps):
                for i, bus in enumerate(scen.bus_ids):
                    w.writerow([FORECAST_TAG, "", t, "bus", bus, repr(float(scen.forecast_load[t, i]))])
                for j, plant in enumerate(scen.plant_ids):
                    w.writerow([FORECAST_TAG, "", t, "wind", plant, repr(float(scen.forecast_wind[t, j]))])
            for k in range(scen.n_scenarios):
                p = repr(float(scen.probs[k]))
                for t in range(scen.n_steps):
                    for i, bus in enumerate(scen.bus_ids):
                        w.writerow([k, p, t, "bus", bus, repr(float(scen.load[k, t, i]))])
                    for j, plant in enumerate(scen.plant_ids):
                        w.writerow([k, p, t, "wind", plant, repr(float(scen.wind[k, t, j]))])
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None


def read_scenarios_csv(path, seed: int = 0) -> ScenarioSet:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from None
    if not rows or rows[0] != SCENARIO_HEADER:
        raise ParseError(f"{path}: expected header {','.join(SCENARIO_HEADER)}")
    buses, plants, probs = {}, {}, {}
    T = 0
    records = []
    try:
        for row in rows[1:]:
            scen, prob, t, kind, ent, value = row
            t = int(t)
            T = max(T, t + 1)
            if kind == "bus":
                ent = int(ent)
                buses.setdefault(ent, len(buses))
            elif kind == "wind":
                plants.setdefault(ent, len(plants))
            else:
                raise ValueError(f"unknown entity kind {kind!r}")
            if scen != FORECAST_TAG:
                probs[int(scen)] = float(prob)
            records.append((scen, t, kind, ent, float(value)))
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None
    K = len(probs)
    load = np.zeros((K, T, len(buses)))
    wind = np.zeros((K, T, len(plants)))
    fl = np.zeros((T, len(buses)))
    fw = np.zeros((T, len(plants)))
    for scen, t, kind, ent, value in records:
        if scen == FORECAST_TAG:
            if kind == "bus":
                fl[t, buses[ent]] = value
            else:
                fw[t, plants[ent]] = value
        elif kind == "bus":
            load[int(scen), t, buses[ent]] = value
        else:
            wind[int(scen), t, plants[ent]] = value
    return ScenarioSet(np.array([probs[k] for k in range(K)]), load, wind, fl, fw,
                       tuple(buses), tuple(plants), seed)
