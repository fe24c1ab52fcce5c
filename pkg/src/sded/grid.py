"""Power-system case data: types, JSON ingestion, wind conversion and storage attachment.

All powers are MW, energies MWh, angles radians. Line susceptances are
per-unit on ``base_mva``; :meth:`Line.flow_coefficient` turns them into MW/rad.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import ParseError, UnknownBus, UnknownGenerator, ValidationError

SCHEMA = "sded-case/1"

DEFAULT_ANGLE_BOUNDS = (-0.6, 0.6)
DEFAULT_EFFICIENCY = 0.95
DEFAULT_DURATION_HOURS = 4.0

# Generator sets converted to wind for the 10/20/30/40 % studies on the 39-bus case.
PENETRATION_CONFIGS = {
    "10%": ("G3",),
    "20%": ("G3", "G6"),
    "30%": ("G3", "G4", "G6"),
    "40%": ("G3", "G4", "G6", "G9"),
}


@dataclass(frozen=True)
class Bus:
    id: int
    demand_mw: float = 0.0
    is_reference: bool = False


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    susceptance_pu: float
    limit_mw: float
    angle_diff_bounds_rad: tuple = DEFAULT_ANGLE_BOUNDS
    phase_shift_rad: float = 0.0
    id: str = ""

    def flow_coefficient(self, base_mva: float) -> float:
        """MW of flow per radian of angle difference."""
        return base_mva * self.susceptance_pu


@dataclass(frozen=True)
class Generator:
    id: str
    bus: int
    p_max_mw: float
    p_min_mw: float
    cost_a: float
    cost_b: float
    cost_c: float
    ramp_mw_per_min: float
    provides_regulation: bool = True

    def cost(self, p_mw):
        """Quadratic hourly cost a p^2 + b p + c ($/h)."""
        return self.cost_a * p_mw * p_mw + self.cost_b * p_mw + self.cost_c

    def ramp_limit(self, dt_hours: float) -> float:
        return self.ramp_mw_per_min * dt_hours * 60.0


@dataclass(frozen=True)
class WindPlant:
    id: str
    bus: int
    capacity_mw: float
    converted_from: Optional[str] = None


@dataclass(frozen=True)
class StorageUnit:
    id: str
    bus: int
    rating_mw: float
    energy_cap_mwh: Optional[float] = None
    eta_ch: float = DEFAULT_EFFICIENCY
    eta_dis: float = DEFAULT_EFFICIENCY
    soc_min: float = 0.1
    soc_max: float = 0.9
    soc_init: float = 0.5

    @property
    def energy_mwh(self) -> float:
        if self.energy_cap_mwh is None:
            return DEFAULT_DURATION_HOURS * self.rating_mw
        return self.energy_cap_mwh


@dataclass(frozen=True)
class GridCase:
    buses: tuple
    lines: tuple
    generators: tuple
    wind_plants: tuple = ()
    storage_units: tuple = ()
    base_mva: float = 100.0
    name: str = ""

    def __post_init__(self):
        for attr in ("buses", "lines", "generators", "wind_plants", "storage_units"):
            object.__setattr__(self, attr, tuple(getattr(self, attr)))

    @property
    def bus_ids(self) -> list:
        return [b.id for b in self.buses]

    def bus_position(self) -> dict:
        return {b.id: i for i, b in enumerate(self.buses)}

    @property
    def reference_bus(self) -> Bus:
        return next(b for b in self.buses if b.is_reference)

    @property
    def total_demand_mw(self) -> float:
        return math.fsum(b.demand_mw for b in self.buses)

    @property
    def conventional_capacity_mw(self) -> float:
        return math.fsum(g.p_max_mw for g in self.generators)

    @property
    def wind_capacity_mw(self) -> float:
        return math.fsum(w.capacity_mw for w in self.wind_plants)

    def generator(self, gen_id: str) -> Generator:
        for g in self.generators:
            if g.id == gen_id:
                return g
        raise UnknownGenerator(gen_id)

    def with_reference(self, bus_id: int) -> "GridCase":
        """Copy with the angle reference moved to ``bus_id``."""
        if bus_id not in self.bus_position():
            raise UnknownBus(bus_id)
        buses = tuple(replace(b, is_reference=(b.id == bus_id)) for b in self.buses)
        return replace(self, buses=buses)


def _line_label(i: int, line: Line) -> str:
    tag = line.id or f"#{i}"
    return f"line {tag} ({line.from_bus}->{line.to_bus})"


def validate(case: GridCase) -> None:
    """Raise ValidationError listing every invariant violation in ``case``."""
    problems = []
    ids = [b.id for b in case.buses]
    known = set(ids)
    if not case.buses:
        problems.append("case has no buses")
    if len(known) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        problems.append(f"duplicate bus ids {dupes}")
    n_ref = sum(b.is_reference for b in case.buses)
    if n_ref != 1:
        problems.append(f"expected exactly one reference bus, found {n_ref}")
    for b in case.buses:
        if not b.demand_mw >= 0:
            problems.append(f"bus {b.id} has negative demand {b.demand_mw}")
    if not case.base_mva > 0:
        problems.append(f"base_mva must be positive, got {case.base_mva}")

    for i, ln in enumerate(case.lines):
        label = _line_label(i, ln)
        for end in (ln.from_bus, ln.to_bus):
            if end not in known:
                problems.append(f"{label} references unknown bus {end}")
        if ln.from_bus == ln.to_bus:
            problems.append(f"{label} is a self-loop")
        if not ln.limit_mw > 0:
            problems.append(f"{label} has non-positive limit {ln.limit_mw}")
        lo, hi = ln.angle_diff_bounds_rad
        if not lo <= 0 <= hi:
            problems.append(f"{label} angle bounds ({lo}, {hi}) must bracket zero")
        if not math.isfinite(ln.susceptance_pu):
            problems.append(f"{label} has non-finite susceptance")

    gen_ids = [g.id for g in case.generators]
    if len(set(gen_ids)) != len(gen_ids):
        problems.append("duplicate generator ids")
    for g in case.generators:
        if g.bus not in known:
            problems.append(f"generator {g.id} references unknown bus {g.bus}")
        if not 0 <= g.p_min_mw <= g.p_max_mw:
            problems.append(f"generator {g.id} needs 0 <= p_min <= p_max")
        if g.cost_a < 0:
            problems.append(f"generator {g.id} has negative quadratic cost (non-convex)")
        if not g.ramp_mw_per_min > 0:
            problems.append(f"generator {g.id} needs a positive ramp rate")

    for w in case.wind_plants:
        if w.bus not in known:
            problems.append(f"wind plant {w.id} references unknown bus {w.bus}")
        if not w.capacity_mw > 0:
            problems.append(f"wind plant {w.id} needs positive capacity")

    for s in case.storage_units:
        if s.bus not in known:
            problems.append(f"storage {s.id} references unknown bus {s.bus}")
        if not s.rating_mw > 0:
            problems.append(f"storage {s.id} needs a positive rating")
        if not s.energy_mwh > 0:
            problems.append(f"storage {s.id} needs positive energy capacity")
        if not 0 <= s.soc_min <= s.soc_init <= s.soc_max <= 1:
            problems.append(f"storage {s.id} needs 0 <= soc_min <= soc_init <= soc_max <= 1")
        if not (0 < s.eta_ch <= 1 and 0 < s.eta_dis <= 1):
            problems.append(f"storage {s.id} efficiencies must lie in (0, 1]")

    if case.buses and not problems and not is_connected(case):
        problems.append("network is not connected (more than one island)")
    if problems:
        raise ValidationError(problems)


def is_connected(case: GridCase) -> bool:
    """Breadth-first search over the line graph."""
    adjacency = {b.id: [] for b in case.buses}
    for ln in case.lines:
        if ln.from_bus in adjacency and ln.to_bus in adjacency:
            adjacency[ln.from_bus].append(ln.to_bus)
            adjacency[ln.to_bus].append(ln.from_bus)
    if not adjacency:
        return True
    start = case.buses[0].id
    seen = {start}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        for nxt in adjacency[node]:
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return len(seen) == len(adjacency)


# -- serialization ---------------------------------------------------------------------

def case_to_dict(case: GridCase) -> dict:
    def lines():
        for ln in case.lines:
            d = asdict(ln)
            d["angle_diff_bounds_rad"] = list(ln.angle_diff_bounds_rad)
            yield d

    return {
        "schema": SCHEMA,
        "name": case.name,
        "base_mva": case.base_mva,
        "buses": [asdict(b) for b in case.buses],
        "lines": list(lines()),
        "generators": [asdict(g) for g in case.generators],
        "wind_plants": [asdict(w) for w in case.wind_plants],
        "storage": [asdict(s) for s in case.storage_units],
    }


def _build(cls, raw: dict, where: str, **fixups):
    try:
        data = dict(raw)
        data.update(fixups)
        return cls(**data)
    except TypeError as exc:
        raise ParseError(f"{where}: {exc}") from None


def case_from_dict(data: dict) -> GridCase:
    if not isinstance(data, dict):
        raise ParseError("case file must hold a JSON object")
    schema = data.get("schema", SCHEMA)
    if schema != SCHEMA:
        raise ParseError(f"unsupported schema {schema!r}, expected {SCHEMA!r}")
    for key in ("base_mva", "buses", "lines", "generators"):
        if key not in data:
            raise ParseError(f"case file missing key {key!r}")
    buses = [_build(Bus, b, f"buses[{i}]") for i, b in enumerate(data["buses"])]
    lines = []
    for i, ln in enumerate(data["lines"]):
        bounds = tuple(ln.get("angle_diff_bounds_rad", DEFAULT_ANGLE_BOUNDS))
        lines.append(_build(Line, ln, f"lines[{i}]", angle_diff_bounds_rad=bounds))
    gens = [_build(Generator, g, f"generators[{i}]") for i, g in enumerate(data["generators"])]
    winds = [_build(WindPlant, w, f"wind_plants[{i}]") for i, w in enumerate(data.get("wind_plants", []))]
    stores = [_build(StorageUnit, s, f"storage[{i}]") for i, s in enumerate(data.get("storage", []))]
    return GridCase(buses, lines, gens, winds, stores, float(data["base_mva"]), data.get("name", ""))


def load_case(path) -> GridCase:
    """Read and validate a ``sded-case/1`` JSON file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read case file {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    case = case_from_dict(data)
    validate(case)
    return case


def save_case(case: GridCase, path) -> None:
    Path(path).write_text(json.dumps(case_to_dict(case), indent=2) + "\n")


# -- case transformations --------------------------------------------------------------

def apply_wind_conversion(case: GridCase, generator_ids: Iterable[str]) -> GridCase:
    """Replace the named generators by wind plants of equal capacity at the same bus.

    Cost and ramp data of converted units are dropped with the generator.
    """
    ids = list(generator_ids)
    known = {g.id for g in case.generators}
    missing = [i for i in ids if i not in known]
    if missing:
        raise UnknownGenerator(", ".join(map(str, missing)))
    if not ids:
        return case
    chosen = set(ids)
    kept = tuple(g for g in case.generators if g.id not in chosen)
    added = tuple(
        WindPlant(f"W{g.id}", g.bus, g.p_max_mw, converted_from=g.id)
        for g in case.generators
        if g.id in chosen
    )
    return replace(case, generators=kept, wind_plants=case.wind_plants + added)


def attach_storage(case: GridCase, specs: Sequence[StorageUnit]) -> GridCase:
    """Append storage units; a unit without energy capacity gets a 4-hour duration."""
    if not specs:
        return case
    known = set(case.bus_ids)
    units = []
    for s in specs:
        if s.bus not in known:
            raise UnknownBus(f"storage {s.id} at unknown bus {s.bus}")
        if s.energy_cap_mwh is None:
            s = replace(s, energy_cap_mwh=DEFAULT_DURATION_HOURS * s.rating_mw)
        units.append(s)
    return replace(case, storage_units=case.storage_units + tuple(units))


def storage_at(buses: Sequence[int], rating_mw: float, **kwargs) -> list:
    """One identical storage unit per bus, ids ``B<bus>``."""
    return [StorageUnit(f"B{bus}", bus, rating_mw, **kwargs) for bus in buses]


def penetration_level(case: GridCase) -> float:
    wind = case.wind_capacity_mw
    total = case.conventional_capacity_mw + wind
    if total == 0:
        return 0.0
    return wind / total


def total_capacity_mw(case: GridCase) -> float:
    return case.conventional_capacity_mw + case.wind_capacity_mw


def bundled_case_path(name: str) -> Path:
    return Path(__file__).parent / "data" / f"{name}.case.json"


def bundled_case(name: str = "ieee39") -> GridCase:
    return load_case(bundled_case_path(name))
