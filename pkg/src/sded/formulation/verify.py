"""Replay every dispatch constraint on a DispatchSolution, independent of the MILP rows.

Residuals are in MW for power rows, radians for angle rows, SOC fraction for
state-of-charge rows and plain distance for binaries. Each family reports
its worst residual over all units, steps and scenarios.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..grid import GridCase
from ..scenarios import ScenarioSet
from .costs import CostParams
from .solution import DispatchSolution

DEFAULT_TOL = 1e-6

STAGE1_FAMILIES = (
    "balance", "flow_definition", "flow_limit", "angle_difference", "reference_angle",
    "ramping", "generation_bounds", "curtailment_bounds", "charge_limit", "discharge_limit",
    "complementarity", "soc_recursion", "soc_bounds", "binary_integrality",
)
STAGE2_FAMILIES = (
    "balance_s", "flow_definition_s", "flow_limit_s", "angle_difference_s", "reference_angle_s",
    "regulation_up_headroom", "regulation_down_headroom", "regulation_ramping",
    "regulation_nonnegativity", "curtailment_bounds_s", "charge_limit_s", "discharge_limit_s",
    "complementarity_s", "soc_recursion_s", "soc_bounds_s", "binary_integrality_s",
)
FAMILIES = STAGE1_FAMILIES + STAGE2_FAMILIES


@dataclass
class VerificationReport:
    residuals: dict = field(default_factory=dict)
    tol: float = DEFAULT_TOL

    @property
    def passed(self) -> bool:
        return all(r <= self.tol for r in self.residuals.values())

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values(), default=0.0)

    def failures(self) -> dict:
        return {k: v for k, v in self.residuals.items() if v > self.tol}

    def __str__(self):
        lines = [f"{'family':28s} residual"]
        lines += [f"{k:28s} {v:.3e}{'  FAIL' if v > self.tol else ''}" for k, v in self.residuals.items()]
        return "\n".join(lines)


def _worst(*arrays) -> float:
    out = 0.0
    for a in arrays:
        a = np.asarray(a, float)
        if a.size:
            out = max(out, float(np.max(a)))
    return out


def _excess(value, lo=None, hi=None):
    """Amount by which ``value`` leaves [lo, hi] (0 inside)."""
    value = np.asarray(value, float)
    out = np.zeros_like(value)
    if lo is not None:
        out = np.maximum(out, np.asarray(lo) - value)
    if hi is not None:
        out = np.maximum(out, value - np.asarray(hi))
    return out


def _lead(a, ndim):
    """Reshape a per-entity vector so it broadcasts against (entity, T[, K])."""
    return np.asarray(a, float).reshape((-1,) + (1,) * (ndim - 1))


def _network(case, flows, angles, res, sfx):
    pos = case.bus_position()
    nd = flows.ndim
    ref = pos[case.reference_bus.id]
    fr = [pos[l.from_bus] for l in case.lines]
    to = [pos[l.to_bus] for l in case.lines]
    if case.lines:
        k = _lead([l.flow_coefficient(case.base_mva) for l in case.lines], nd)
        shift = _lead([l.phase_shift_rad for l in case.lines], nd)
        diff = angles[fr] - angles[to]
        res["flow_definition" + sfx] = _worst(np.abs(flows - k * (diff - shift)))
        lim = _lead([l.limit_mw for l in case.lines], nd)
        res["flow_limit" + sfx] = _worst(_excess(flows, -lim, lim))
        lo = _lead([l.angle_diff_bounds_rad[0] for l in case.lines], nd)
        hi = _lead([l.angle_diff_bounds_rad[1] for l in case.lines], nd)
        res["angle_difference" + sfx] = _worst(_excess(diff, lo, hi))
    else:
        res["flow_definition" + sfx] = res["flow_limit" + sfx] = res["angle_difference" + sfx] = 0.0
    res["reference_angle" + sfx] = _worst(np.abs(angles[ref]))
    return fr, to


def _storage(case, ch, dis, gch, gdis, soc, dt, res, sfx, terminal):
    units = case.storage_units
    if not units:
        for fam in ("charge_limit", "discharge_limit", "complementarity", "soc_recursion", "soc_bounds"):
            res[fam + sfx] = 0.0
        return
    nd = ch.ndim
    rating = _lead([u.rating_mw for u in units], nd)
    res["charge_limit" + sfx] = _worst(_excess(ch, 0.0, gch * rating))
    res["discharge_limit" + sfx] = _worst(_excess(dis, 0.0, gdis * rating))
    res["complementarity" + sfx] = _worst(gch + gdis - 1.0, np.minimum(ch, dis))
    e = _lead([u.energy_mwh for u in units], nd)
    eta_c = _lead([u.eta_ch for u in units], nd)
    eta_d = _lead([u.eta_dis for u in units], nd)
    init = _lead([u.soc_init for u in units], nd)
    prev = np.concatenate([np.broadcast_to(init, soc[:, :1].shape), soc[:, :-1]], axis=1)
    expected = prev + (eta_c * ch - dis / eta_d) * dt / e
    res["soc_recursion" + sfx] = _worst(np.abs(soc - expected))
    lo = _lead([u.soc_min for u in units], nd)
    hi = _lead([u.soc_max for u in units], nd)
    bounds = _worst(_excess(soc, lo, hi))
    if terminal:
        bounds = max(bounds, _worst(_excess(soc[:, -1], init[:, 0])))
    res["soc_bounds" + sfx] = bounds


def _integrality(*arrays):
    return _worst(*(np.abs(a - np.round(a)) for a in arrays),
                  *(_excess(a, 0.0, 1.0) for a in arrays))


def verify_solution(sol: DispatchSolution, case: GridCase, scen: ScenarioSet,
                    costs: CostParams = CostParams(), tol: float = DEFAULT_TOL) -> VerificationReport:
    dt = costs.dt_hours
    opts = sol.options
    res = {}
    gens = case.generators
    pos = case.bus_position()
    N, T, K = len(case.buses), scen.n_steps, scen.n_scenarios
    x = sol.generation
    pmin = _lead([g.p_min_mw for g in gens], 2)
    pmax = _lead([g.p_max_mw for g in gens], 2)
    ramp = _lead([g.ramp_limit(dt) for g in gens], 2)
    anchor = dict(opts.initial_dispatch or {})

    def injections(gen_out, wind_out, load_net, dis, ch, flows, fr, to, shape):
        inj = np.zeros(shape)
        for i, g in enumerate(gens):
            inj[pos[g.bus]] += gen_out[i]
        for w, p in enumerate(case.wind_plants):
            inj[pos[p.bus]] += wind_out[w]
        for b, u in enumerate(case.storage_units):
            inj[pos[u.bus]] += dis[b] - ch[b]
        for n in range(len(case.lines)):
            inj[fr[n]] -= flows[n]
            inj[to[n]] += flows[n]
        return inj - load_net

    # first stage
    fr, to = _network(case, sol.flows, sol.angles, res, "")
    inj = injections(x - sol.gen_curtail, scen.forecast_wind.T - sol.wind_curtail,
                     scen.forecast_load.T - sol.load_curtail, sol.discharge, sol.charge,
                     sol.flows, fr, to, (N, T))
    res["balance"] = _worst(np.abs(inj))

    def ramp_excess(out):
        parts = [_excess(np.diff(out, axis=1), -ramp[..., None] if out.ndim == 3 else -ramp,
                         ramp[..., None] if out.ndim == 3 else ramp)]
        for i, g in enumerate(gens):
            if g.id in anchor:
                parts.append(_excess(out[i, 0] - anchor[g.id], -ramp[i, 0], ramp[i, 0]))
        return _worst(*parts)

    res["ramping"] = ramp_excess(x) if len(gens) else 0.0
    res["generation_bounds"] = _worst(_excess(x, pmin, pmax))
    res["curtailment_bounds"] = _worst(
        _excess(sol.gen_curtail, 0.0, x),
        _excess(sol.wind_curtail, 0.0, scen.forecast_wind.T),
        _excess(sol.load_curtail, 0.0, scen.forecast_load.T),
    )
    _storage(case, sol.charge, sol.discharge, sol.gamma_ch, sol.gamma_dis, sol.soc, dt, res, "",
             opts.terminal_soc)
    res["binary_integrality"] = _integrality(sol.gamma_ch, sol.gamma_dis)

    # second stage
    if K == 0:
        for fam in STAGE2_FAMILIES:
            res[fam] = 0.0
    else:
        reg = np.array([g.provides_regulation for g in gens], bool)
        x3 = np.broadcast_to(x[:, :, None], x.shape + (K,))
        out = np.where(reg[:, None, None], x3 + sol.reg_up - sol.reg_down, x3 - sol.gen_curtail_s)
        _network(case, sol.flows_s, sol.angles_s, res, "_s")
        inj = injections(out, np.transpose(scen.wind, (2, 1, 0)) - sol.wind_curtail_s,
                         np.transpose(scen.load, (2, 1, 0)) - sol.load_curtail_s,
                         sol.discharge_s, sol.charge_s, sol.flows_s, fr, to, (N, T, K))
        res["balance_s"] = _worst(np.abs(inj))
        p3max, p3min = pmax[..., None], pmin[..., None]
        res["regulation_up_headroom"] = _worst(_excess(x3 + sol.reg_up, hi=p3max)[reg])
        res["regulation_down_headroom"] = _worst(_excess(x3 - sol.reg_down, lo=p3min)[reg])
        res["regulation_ramping"] = ramp_excess(np.where(reg[:, None, None], out, x3)) if len(gens) else 0.0
        res["regulation_nonnegativity"] = _worst(
            _excess(sol.reg_up, lo=0.0), _excess(sol.reg_down, lo=0.0),
            np.abs(sol.reg_up[~reg]), np.abs(sol.reg_down[~reg]),
        )
        res["curtailment_bounds_s"] = _worst(
            _excess(sol.gen_curtail_s[~reg], 0.0, x3[~reg]), np.abs(sol.gen_curtail_s[reg]),
            _excess(sol.wind_curtail_s, 0.0, np.transpose(scen.wind, (2, 1, 0))),
            _excess(sol.load_curtail_s, 0.0, np.transpose(scen.load, (2, 1, 0))),
        )
        _storage(case, sol.charge_s, sol.discharge_s, sol.gamma_ch_s, sol.gamma_dis_s, sol.soc_s,
                 dt, res, "_s", opts.terminal_soc)
        res["binary_integrality_s"] = _integrality(sol.gamma_ch_s, sol.gamma_dis_s)

    return VerificationReport({k: res[k] for k in FAMILIES}, tol)
