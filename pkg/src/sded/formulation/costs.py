"""Cost parameters and the secant piecewise-linear generation cost."""
from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np

from ..grid import Generator


@dataclass(frozen=True)
class CostParams:
    """Penalty and battery rates in $/MWh; ``dt_hours`` scales every term to energy."""

    c_wind_curtail: float = 100.0
    c_load_curtail: float = 3000.0
    c_gen_curtail: float = 400.0
    c_charge: float = 10.0
    c_discharge: float = 10.0
    regulation_multiplier: float = 1.5
    dt_hours: float = 0.25
    pwl_segments: int = 8

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be nonnegative")
        if self.dt_hours <= 0:
            raise ValueError("dt_hours must be positive")
        if int(self.pwl_segments) != self.pwl_segments or self.pwl_segments < 1:
            raise ValueError("pwl_segments must be a positive integer")

    def regulation_price(self, gen: Generator) -> float:
        return self.regulation_multiplier * gen.cost_b

    def scaled(self, factor: float) -> "CostParams":
        """All $ rates multiplied by ``factor`` (generator coefficients are not touched)."""
        money = ("c_wind_curtail", "c_load_curtail", "c_gen_curtail", "c_charge", "c_discharge")
        return replace(self, **{k: getattr(self, k) * factor for k in money})

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def pwl_breakpoints(gen: Generator, segments: int):
    """Equally spaced breakpoints on [p_min, p_max] and the hourly quadratic cost at each."""
    bp = np.linspace(gen.p_min_mw, gen.p_max_mw, int(segments) + 1)
    return bp, gen.cost(bp)


def pwl_cost(gen: Generator, p, segments: int):
    """Secant interpolation of the hourly cost; exact at breakpoints, never below the quadratic."""
    bp, val = pwl_breakpoints(gen, segments)
    if bp[-1] == bp[0]:
        return gen.cost(np.asarray(p, float))
    return np.interp(p, bp, val)
