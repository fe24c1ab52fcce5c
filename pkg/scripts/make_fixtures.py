"""Regenerate the bundled case and forecast fixtures under src/sded/data/.

IEEE 39-bus topology, loads, line reactances and thermal ratings follow the
standard MATPOWER ``case39`` (base 100 MVA). Susceptance is 1/x; transformer
taps and line resistance are dropped. Generator limits, cost coefficients and
ramp rates come from the generator table of the 39-bus storage study (same
capacities as case39, total 7367 MW).

The forecast fixtures are synthetic: the median paths follow the expected
system demand and available wind of the 20 % / 2x20 MW dispatch summary
(3 pm, 2018-01-04, 15-minute steps), and the 99 percentiles come from a
Gaussian whose spread widens with lead time. Raw values are MW.

    python scripts/make_fixtures.py
"""
import csv
import json
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np
from scipy.stats import norm

DATA = Path(__file__).resolve().parents[1] / "src" / "sded" / "data"

# bus, Pd (MW)
BUS_LOAD = [
    (1, 97.6), (2, 0.0), (3, 322.0), (4, 500.0), (5, 0.0), (6, 0.0), (7, 233.8),
    (8, 522.0), (9, 6.5), (10, 0.0), (11, 0.0), (12, 8.53), (13, 0.0), (14, 0.0),
    (15, 320.0), (16, 329.0), (17, 0.0), (18, 158.0), (19, 0.0), (20, 680.0),
    (21, 274.0), (22, 0.0), (23, 247.5), (24, 308.6), (25, 224.0), (26, 139.0),
    (27, 281.0), (28, 206.0), (29, 283.5), (30, 0.0), (31, 9.2), (32, 0.0),
    (33, 0.0), (34, 0.0), (35, 0.0), (36, 0.0), (37, 0.0), (38, 0.0), (39, 1104.0),
]
REFERENCE_BUS = 31

# from, to, x (pu), rateA (MW)
BRANCHES = [
    (1, 2, 0.0411, 600), (1, 39, 0.0250, 1000), (2, 3, 0.0151, 500), (2, 25, 0.0086, 500),
    (2, 30, 0.0181, 900), (3, 4, 0.0213, 500), (3, 18, 0.0133, 500), (4, 5, 0.0128, 600),
    (4, 14, 0.0129, 500), (5, 6, 0.0026, 1200), (5, 8, 0.0112, 900), (6, 7, 0.0092, 900),
    (6, 11, 0.0082, 480), (6, 31, 0.0250, 1800), (7, 8, 0.0046, 900), (8, 9, 0.0363, 900),
    (9, 39, 0.0250, 900), (10, 11, 0.0043, 600), (10, 13, 0.0043, 600), (10, 32, 0.0200, 900),
    (12, 11, 0.0435, 500), (12, 13, 0.0435, 500), (13, 14, 0.0101, 600), (14, 15, 0.0217, 600),
    (15, 16, 0.0094, 600), (16, 17, 0.0089, 600), (16, 19, 0.0195, 600), (16, 21, 0.0135, 600),
    (16, 24, 0.0059, 600), (17, 18, 0.0082, 600), (17, 27, 0.0173, 600), (19, 20, 0.0138, 900),
    (19, 33, 0.0142, 900), (20, 34, 0.0180, 900), (21, 22, 0.0140, 900), (22, 23, 0.0096, 600),
    (22, 35, 0.0143, 900), (23, 24, 0.0350, 600), (23, 36, 0.0272, 900), (25, 26, 0.0323, 600),
    (25, 37, 0.0232, 900), (26, 27, 0.0147, 600), (26, 28, 0.0474, 600), (26, 29, 0.0625, 600),
    (28, 29, 0.0151, 600), (29, 38, 0.0156, 1200),
]

# id, bus, pmax, pmin, a, b, c, ramp MW/min
GENERATORS = [
    ("G1", 30, 1040, 0, 0.00048, 16.19, 1000, 6.2),
    ("G2", 31, 646, 0, 0.00031, 17.26, 970, 3.8),
    ("G3", 32, 725, 0, 0.00211, 16.50, 680, 4.3),
    ("G4", 33, 652, 0, 0.00200, 16.60, 700, 3.9),
    ("G5", 34, 508, 0, 0.00398, 19.70, 450, 3.1),
    ("G6", 35, 687, 0, 0.00712, 22.26, 370, 4.11),
    ("G7", 36, 580, 0, 0.00079, 27.74, 480, 3.5),
    ("G8", 37, 564, 0, 0.00413, 25.92, 660, 3.4),
    ("G9", 38, 865, 0, 0.00222, 27.27, 665, 5.2),
    ("G10", 39, 1100, 0, 0.00173, 27.79, 670, 6.6),
]

# Expected demand / available wind at 20 % penetration, T1..T8 (MW).
DEMAND_PATH = [4598.9, 4669.3, 4379.1, 4170.6, 4143.8, 4399.4, 3603.5, 3799.1]
WIND_PATH = [475.1, 476.0, 453.9, 455.6, 407.1, 371.8, 338.7, 336.8]


def ieee39():
    return {
        "schema": "sded-case/1",
        "name": "ieee39",
        "base_mva": 100.0,
        "buses": [
            {"id": b, "demand_mw": pd, "is_reference": b == REFERENCE_BUS} for b, pd in BUS_LOAD
        ],
        "lines": [
            {
                "id": f"L{i + 1}",
                "from_bus": f,
                "to_bus": t,
                "susceptance_pu": round(1.0 / x, 10),
                "limit_mw": float(rate),
                "angle_diff_bounds_rad": [-0.6, 0.6],
                "phase_shift_rad": 0.0,
            }
            for i, (f, t, x, rate) in enumerate(BRANCHES)
        ],
        "generators": [
            {
                "id": gid, "bus": bus, "p_max_mw": float(pmax), "p_min_mw": float(pmin),
                "cost_a": a, "cost_b": b, "cost_c": float(c), "ramp_mw_per_min": ramp,
                "provides_regulation": True,
            }
            for gid, bus, pmax, pmin, a, b, c, ramp in GENERATORS
        ],
        "wind_plants": [],
        "storage": [],
    }


def three_bus():
    line = {"angle_diff_bounds_rad": [-0.6, 0.6], "phase_shift_rad": 0.0}
    return {
        "schema": "sded-case/1",
        "name": "three_bus",
        "base_mva": 100.0,
        "buses": [
            {"id": 1, "demand_mw": 40.0, "is_reference": True},
            {"id": 2, "demand_mw": 60.0, "is_reference": False},
            {"id": 3, "demand_mw": 100.0, "is_reference": False},
        ],
        "lines": [
            {"id": "L1", "from_bus": 1, "to_bus": 2, "susceptance_pu": 10.0, "limit_mw": 120.0, **line},
            {"id": "L2", "from_bus": 1, "to_bus": 3, "susceptance_pu": 10.0, "limit_mw": 60.0, **line},
            {"id": "L3", "from_bus": 2, "to_bus": 3, "susceptance_pu": 10.0, "limit_mw": 120.0, **line},
        ],
        "generators": [
            {"id": "G1", "bus": 1, "p_max_mw": 200.0, "p_min_mw": 20.0, "cost_a": 0.004,
             "cost_b": 15.0, "cost_c": 100.0, "ramp_mw_per_min": 2.0, "provides_regulation": True},
            {"id": "G2", "bus": 2, "p_max_mw": 150.0, "p_min_mw": 10.0, "cost_a": 0.01,
             "cost_b": 28.0, "cost_c": 80.0, "ramp_mw_per_min": 3.0, "provides_regulation": True},
        ],
        "wind_plants": [{"id": "W1", "bus": 3, "capacity_mw": 60.0, "converted_from": None}],
        "storage": [
            {"id": "B1", "bus": 3, "rating_mw": 20.0, "energy_cap_mwh": 10.0, "eta_ch": 0.95,
             "eta_dis": 0.95, "soc_min": 0.1, "soc_max": 0.9, "soc_init": 0.5},
        ],
    }


def percentile_rows(path, spread0, spread_step, start):
    z = norm.ppf(np.arange(1, 100) / 100.0)
    rows = []
    for t, median in enumerate(path):
        sigma = spread0 + spread_step * t
        values = np.clip(median * (1.0 + sigma * z), 0.0, None)
        stamp = (start + timedelta(minutes=15 * t)).strftime("%Y-%m-%dT%H:%M:%SZ")
        rows.append([stamp] + [f"{v:.4f}" for v in values])
    return rows


def write_forecast(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["timestamp"] + [f"p{i}" for i in range(1, 100)])
        writer.writerows(rows)


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    for name, builder in (("ieee39", ieee39), ("three_bus", three_bus)):
        (DATA / f"{name}.case.json").write_text(json.dumps(builder(), indent=2) + "\n")
    start = datetime(2018, 1, 4, 15, 0, tzinfo=timezone.utc)
    write_forecast(DATA / "ercot_west_load.csv", percentile_rows(DEMAND_PATH, 0.015, 0.003, start))
    write_forecast(DATA / "ercot_west_wind.csv", percentile_rows(WIND_PATH, 0.08, 0.01, start))
    write_forecast(DATA / "three_bus_load.csv", percentile_rows([180.0, 120.0], 0.03, 0.01, start))
    write_forecast(DATA / "three_bus_wind.csv", percentile_rows([30.0, 45.0], 0.15, 0.05, start))


if __name__ == "__main__":
    main()
