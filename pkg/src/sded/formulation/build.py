"""Assemble the two-stage dispatch-with-storage problem as one extensive-form MILP.

Column order is stage, kind, entity, timestep, scenario. Every cost term is
an energy cost (rate x dt_hours); second-stage terms are further weighted by
the scenario probability. Generation cost uses the secant piecewise-linear
form ``x = p_min + sum_s z_s`` with ``0 <= z_s <= width_s`` and increasing
slopes, so the LP fills segments in order; ``dt * e(p_min)`` per generator
and step becomes the objective constant.

Angle-difference limits are folded into the flow bounds when the line's
flow coefficient is positive (``p = k (d_i - d_j - shift)`` makes them
equivalent); otherwise explicit rows are emitted.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from ..errors import DimensionMismatch, EmptyHorizon
from ..grid import GridCase
from ..milp.model import EQ, GE, LE, MilpModel, ModelBuilder
from ..scenarios import ScenarioSet
from .costs import CostParams, pwl_breakpoints
from .index import VarIndex


@dataclass(frozen=True)
class FormulationOptions:
    terminal_soc: bool = False                       # require SOC_T >= soc_init
    initial_dispatch: Optional[Mapping[str, float]] = None  # ramp anchor for t = 0
    reference_bus: Optional[int] = None              # overrides the case's reference bus


@dataclass(frozen=True, eq=False)
class ExtensiveForm:
    model: MilpModel
    index: VarIndex
    groups: np.ndarray      # (P, 4): ch, dis, g_ch, g_dis column ids, every (b, t[, scenario])
    options: FormulationOptions = field(default_factory=FormulationOptions)

    def __iter__(self):
        # allows ``model, index = build_extensive_form(...)``
        return iter((self.model, self.index))


def _check_dimensions(case: GridCase, scen: ScenarioSet):
    T = scen.n_steps
    if T == 0:
        raise EmptyHorizon("scenario set has no timesteps")
    bus_ids = tuple(b.id for b in case.buses)
    plant_ids = tuple(w.id for w in case.wind_plants)
    if scen.bus_ids != bus_ids:
        raise DimensionMismatch(f"scenario buses {len(scen.bus_ids)} do not match case buses {len(bus_ids)}")
    if scen.plant_ids != plant_ids:
        raise DimensionMismatch(f"scenario wind plants {scen.plant_ids} do not match case {plant_ids}")


def _flow_bounds(case: GridCase):
    """Flow bounds (MW) with angle-difference limits folded in, and the lines needing angle rows."""
    lo, hi, explicit = [], [], []
    for n, line in enumerate(case.lines):
        k = line.flow_coefficient(case.base_mva)
        a_lo, a_hi = line.angle_diff_bounds_rad
        f_lo, f_hi = -line.limit_mw, line.limit_mw
        if k > 0:
            f_lo = max(f_lo, k * (a_lo - line.phase_shift_rad))
            f_hi = min(f_hi, k * (a_hi - line.phase_shift_rad))
            if f_lo > f_hi:
                # the two limits are incompatible; keep both as rows so infeasibility is explicit
                f_lo, f_hi = -line.limit_mw, line.limit_mw
                explicit.append(n)
        else:
            explicit.append(n)
        lo.append(f_lo)
        hi.append(f_hi)
    return np.array(lo), np.array(hi), explicit


class _Network:
    """Bus positions and incidence lists shared by both stages."""

    def __init__(self, case: GridCase, reference_bus):
        self.pos = case.bus_position()
        self.ref = self.pos[reference_bus if reference_bus is not None else case.reference_bus.id]
        self.fr = np.array([self.pos[l.from_bus] for l in case.lines], dtype=int)
        self.to = np.array([self.pos[l.to_bus] for l in case.lines], dtype=int)
        self.k = np.array([l.flow_coefficient(case.base_mva) for l in case.lines])
        self.shift = np.array([l.phase_shift_rad for l in case.lines])
        self.f_lo, self.f_hi, self.explicit = _flow_bounds(case)


def _network_block(mb, net, case, balance, stage, tail):
    """Angles, flows, flow definition, explicit angle rows, and flow terms in ``balance``."""
    N, L = len(case.buses), len(case.lines)
    sfx = "" if stage == 1 else "_s"
    dlb = np.full((N,) + tail, -np.inf)
    dub = np.full((N,) + tail, np.inf)
    dlb[net.ref] = dub[net.ref] = 0.0
    delta = mb.add_vars("delta" + sfx, (N,) + tail, lb=dlb, ub=dub)
    ext = lambda a: a.reshape((-1,) + (1,) * len(tail))
    flow = mb.add_vars("flow" + sfx, (L,) + tail, lb=ext(net.f_lo), ub=ext(net.f_hi))
    if L:
        k = ext(net.k)
        mb.add_rows("flow_def" + sfx, [(flow, 1.0), (delta[net.fr], -k), (delta[net.to], k)],
                    EQ, -k * ext(net.shift))
        for n in net.explicit:
            a_lo, a_hi = case.lines[n].angle_diff_bounds_rad
            terms = [(delta[net.fr[n]], 1.0), (delta[net.to[n]], -1.0)]
            mb.add_rows("angle_lo" + sfx, terms, GE, a_lo, shape=tail)
            mb.add_rows("angle_hi" + sfx, terms, LE, a_hi, shape=tail)
        for n in range(L):
            mb.add_entries(balance[net.fr[n]], flow[n], -1.0)
            mb.add_entries(balance[net.to[n]], flow[n], 1.0)
    return delta, flow


def _storage_block(mb, case, costs, balance, pos, weight, stage, tail, terminal_soc):
    """Charge/discharge, mode binaries, gating, complementarity and SOC rows."""
    units = case.storage_units
    B = len(units)
    sfx = "" if stage == 1 else "_s"
    dt = costs.dt_hours
    rating = np.array([u.rating_mw for u in units], float).reshape((B,) + (1,) * len(tail))
    ch = mb.add_vars("ch" + sfx, (B,) + tail, ub=rating, cost=costs.c_charge * dt * weight)
    dis = mb.add_vars("dis" + sfx, (B,) + tail, ub=rating, cost=costs.c_discharge * dt * weight)
    g_ch = mb.add_vars("g_ch" + sfx, (B,) + tail, ub=1.0, binary=True)
    g_dis = mb.add_vars("g_dis" + sfx, (B,) + tail, ub=1.0, binary=True)
    s_lo = np.array([u.soc_min for u in units], float).reshape(rating.shape)
    s_hi = np.array([u.soc_max for u in units], float).reshape(rating.shape)
    soc = mb.add_vars("soc" + sfx, (B,) + tail, lb=s_lo, ub=s_hi)
    if B:
        mb.add_rows("ch_gate" + sfx, [(ch, 1.0), (g_ch, -rating)], LE, 0.0)
        mb.add_rows("dis_gate" + sfx, [(dis, 1.0), (g_dis, -rating)], LE, 0.0)
        mb.add_rows("mode" + sfx, [(g_ch, 1.0), (g_dis, 1.0)], LE, 1.0)
        for b, u in enumerate(units):
            e = u.energy_mwh
            a_ch = u.eta_ch * dt / e
            a_dis = dt / (u.eta_dis * e)
            rhs = np.zeros(tail)
            rhs[0] = u.soc_init
            terms = [(soc[b], 1.0), (ch[b], -a_ch), (dis[b], a_dis)]
            rows = mb.add_rows("soc_dyn" + sfx, terms, EQ, rhs)
            mb.add_entries(rows[1:], soc[b][:-1], -1.0)
            if terminal_soc:
                mb.add_rows("soc_end" + sfx, [(soc[b][-1], 1.0)], GE, u.soc_init,
                            shape=tail[1:])
            mb.add_entries(balance[pos[u.bus]], dis[b], 1.0)
            mb.add_entries(balance[pos[u.bus]], ch[b], -1.0)
    return ch, dis, g_ch, g_dis, soc


def build_extensive_form(case: GridCase, scen: ScenarioSet, costs: CostParams = CostParams(),
                         options: FormulationOptions = FormulationOptions()) -> ExtensiveForm:
    """Build the extensive-form MILP. Unpacks as ``model, index``; ``.groups`` feeds the fast path."""
    _check_dimensions(case, scen)
    T, K = scen.n_steps, scen.n_scenarios
    dt = costs.dt_hours
    gens, plants, units = case.generators, case.wind_plants, case.storage_units
    G, W, N, L, B = len(gens), len(plants), len(case.buses), len(case.lines), len(units)
    S = int(costs.pwl_segments)
    net = _Network(case, options.reference_bus)
    pos = net.pos
    gen_bus = [pos[g.bus] for g in gens]
    plant_bus = [pos[w.bus] for w in plants]
    bus_labels = [b.id for b in case.buses]
    gen_labels = [g.id for g in gens]
    reg = [i for i, g in enumerate(gens) if g.provides_regulation]
    nonreg = [i for i, g in enumerate(gens) if not g.provides_regulation]
    ramp = np.array([g.ramp_limit(dt) for g in gens], float)
    anchor = dict(options.initial_dispatch or {})

    mb = ModelBuilder("sded_extensive_form")
    idx = VarIndex()
    steps = range(T)
    scenarios = range(K)

    # ---- first stage -------------------------------------------------------------
    pmin = np.array([g.p_min_mw for g in gens], float)
    pmax = np.array([g.p_max_mw for g in gens], float)
    x = mb.add_vars("x", (G, T), lb=pmin[:, None], ub=pmax[:, None])
    widths = np.zeros((G, S))
    slopes = np.zeros((G, S))
    for i, g in enumerate(gens):
        bp, val = pwl_breakpoints(g, S)
        widths[i] = np.diff(bp)
        with np.errstate(invalid="ignore", divide="ignore"):
            slopes[i] = np.where(widths[i] > 0, np.diff(val) / np.where(widths[i] > 0, widths[i], 1), g.cost_b)
        mb.offset += T * dt * g.cost(g.p_min_mw)
    z = mb.add_vars("pwl", (G, T, S), ub=widths[:, None, :], cost=dt * slopes[:, None, :])
    x_curt = mb.add_vars("x_curt", (G, T), ub=pmax[:, None], cost=costs.c_gen_curtail * dt)
    u_curt = mb.add_vars("u_curt", (W, T), ub=scen.forecast_wind.T, cost=costs.c_wind_curtail * dt)
    d_curt = mb.add_vars("d_curt", (N, T), ub=scen.forecast_load.T, cost=costs.c_load_curtail * dt)

    # balance rhs: demand minus forecast wind at each bus
    rhs = scen.forecast_load.T.copy()
    for w, b in enumerate(plant_bus):
        rhs[b] -= scen.forecast_wind[:, w]
    balance = mb.add_rows("balance", [], EQ, rhs, shape=(N, T))
    for i, b in enumerate(gen_bus):
        mb.add_entries(balance[b], x[i], 1.0)
        mb.add_entries(balance[b], x_curt[i], -1.0)
    for w, b in enumerate(plant_bus):
        mb.add_entries(balance[b], u_curt[w], -1.0)
    mb.add_entries(balance, d_curt, 1.0)

    if G:
        mb.add_rows("pwl_link", [(x, 1.0)] + [(z[:, :, s], -1.0) for s in range(S)], EQ,
                    pmin[:, None], shape=(G, T))
        mb.add_rows("x_curt_cap", [(x_curt, 1.0), (x, -1.0)], LE, 0.0)
        if T > 1:
            d = [(x[:, 1:], 1.0), (x[:, :-1], -1.0)]
            mb.add_rows("ramp_up", d, LE, ramp[:, None])
            mb.add_rows("ramp_down", d, GE, -ramp[:, None])
        for i, g in enumerate(gens):
            if g.id in anchor:
                mb.add_rows("ramp_up0", [(x[i, 0], 1.0)], LE, anchor[g.id] + ramp[i], shape=())
                mb.add_rows("ramp_down0", [(x[i, 0], 1.0)], GE, anchor[g.id] - ramp[i], shape=())

    ch, dis, g_ch, g_dis, soc = _storage_block(mb, case, costs, balance, pos, 1.0, 1, (T,),
                                               options.terminal_soc)
    delta, flow = _network_block(mb, net, case, balance, 1, (T,))

    idx.add("x", x, ("gen", "t"), (gen_labels, steps))
    idx.add("pwl", z, ("gen", "t", "segment"), (gen_labels, steps, range(S)))
    idx.add("x_curt", x_curt, ("gen", "t"), (gen_labels, steps))
    idx.add("u_curt", u_curt, ("plant", "t"), ([w.id for w in plants], steps))
    idx.add("d_curt", d_curt, ("bus", "t"), (bus_labels, steps))
    unit_labels = [u.id for u in units]
    for kind, ids in (("ch", ch), ("dis", dis), ("g_ch", g_ch), ("g_dis", g_dis), ("soc", soc)):
        idx.add(kind, ids, ("unit", "t"), (unit_labels, steps))
    idx.add("delta", delta, ("bus", "t"), (bus_labels, steps))
    idx.add("flow", flow, ("line", "t"), ([l.id or f"L{n + 1}" for n, l in enumerate(case.lines)], steps))
    groups = [np.stack([ch.ravel(), dis.ravel(), g_ch.ravel(), g_dis.ravel()], axis=1)]

    # ---- second stage ------------------------------------------------------------
    if K:
        tk = (T, K)
        prob = scen.probs[None, None, :]
        reg_cost = np.array([costs.regulation_price(gens[i]) for i in reg]).reshape(-1, 1, 1)
        span = (pmax - pmin)[reg].reshape(-1, 1, 1)
        R = len(reg)
        xp = mb.add_vars("reg_up", (R,) + tk, ub=span, cost=reg_cost * dt * prob)
        xm = mb.add_vars("reg_down", (R,) + tk, ub=span, cost=reg_cost * dt * prob)
        xc_s = mb.add_vars("x_curt_s", (len(nonreg),) + tk, ub=pmax[nonreg].reshape(-1, 1, 1),
                           cost=costs.c_gen_curtail * dt * prob)
        uc_s = mb.add_vars("u_curt_s", (W,) + tk, ub=np.transpose(scen.wind, (2, 1, 0)),
                           cost=costs.c_wind_curtail * dt * prob)
        dc_s = mb.add_vars("d_curt_s", (N,) + tk, ub=np.transpose(scen.load, (2, 1, 0)),
                           cost=costs.c_load_curtail * dt * prob)

        rhs_s = np.transpose(scen.load, (2, 1, 0)).copy()
        for w, b in enumerate(plant_bus):
            rhs_s[b] -= scen.wind[:, :, w].T
        bal_s = mb.add_rows("balance_s", [], EQ, rhs_s, shape=(N,) + tk)
        xk = lambda i: np.broadcast_to(x[i][:, None], tk)
        for i, b in enumerate(gen_bus):
            mb.add_entries(bal_s[b], xk(i), 1.0)
        for r, i in enumerate(reg):
            mb.add_entries(bal_s[gen_bus[i]], xp[r], 1.0)
            mb.add_entries(bal_s[gen_bus[i]], xm[r], -1.0)
        for r, i in enumerate(nonreg):
            mb.add_entries(bal_s[gen_bus[i]], xc_s[r], -1.0)
        for w, b in enumerate(plant_bus):
            mb.add_entries(bal_s[b], uc_s[w], -1.0)
        mb.add_entries(bal_s, dc_s, 1.0)

        if R:
            xr = np.broadcast_to(x[reg][:, :, None], (R,) + tk)
            mb.add_rows("reg_up_cap", [(xr, 1.0), (xp, 1.0)], LE, pmax[reg].reshape(-1, 1, 1))
            mb.add_rows("reg_down_cap", [(xr, 1.0), (xm, -1.0)], GE, pmin[reg].reshape(-1, 1, 1))
            if T > 1:
                d = [(xr[:, 1:], 1.0), (xp[:, 1:], 1.0), (xm[:, 1:], -1.0),
                     (xr[:, :-1], -1.0), (xp[:, :-1], -1.0), (xm[:, :-1], 1.0)]
                mb.add_rows("reg_ramp_up", d, LE, ramp[reg].reshape(-1, 1, 1))
                mb.add_rows("reg_ramp_down", d, GE, -ramp[reg].reshape(-1, 1, 1))
            for r, i in enumerate(reg):
                if gens[i].id in anchor:
                    d0 = [(xr[r, 0], 1.0), (xp[r, 0], 1.0), (xm[r, 0], -1.0)]
                    mb.add_rows("reg_ramp_up0", d0, LE, anchor[gens[i].id] + ramp[i])
                    mb.add_rows("reg_ramp_down0", d0, GE, anchor[gens[i].id] - ramp[i])
        if nonreg:
            xn = np.broadcast_to(x[nonreg][:, :, None], (len(nonreg),) + tk)
            mb.add_rows("x_curt_cap_s", [(xc_s, 1.0), (xn, -1.0)], LE, 0.0)

        ch_s, dis_s, g_ch_s, g_dis_s, soc_s = _storage_block(
            mb, case, costs, bal_s, pos, prob, 2, tk, options.terminal_soc)
        delta_s, flow_s = _network_block(mb, net, case, bal_s, 2, tk)

        sl = (steps, scenarios)
        idx.add("reg_up", xp, ("gen", "t", "scenario"), ([gens[i].id for i in reg],) + sl)
        idx.add("reg_down", xm, ("gen", "t", "scenario"), ([gens[i].id for i in reg],) + sl)
        idx.add("x_curt_s", xc_s, ("gen", "t", "scenario"), ([gens[i].id for i in nonreg],) + sl)
        idx.add("u_curt_s", uc_s, ("plant", "t", "scenario"), ([w.id for w in plants],) + sl)
        idx.add("d_curt_s", dc_s, ("bus", "t", "scenario"), (bus_labels,) + sl)
        for kind, ids in (("ch_s", ch_s), ("dis_s", dis_s), ("g_ch_s", g_ch_s),
                          ("g_dis_s", g_dis_s), ("soc_s", soc_s)):
            idx.add(kind, ids, ("unit", "t", "scenario"), (unit_labels,) + sl)
        idx.add("delta_s", delta_s, ("bus", "t", "scenario"), (bus_labels,) + sl)
        idx.add("flow_s", flow_s, ("line", "t", "scenario"),
                ([l.id or f"L{n + 1}" for n, l in enumerate(case.lines)],) + sl)
        groups.append(np.stack([ch_s.ravel(), dis_s.ravel(), g_ch_s.ravel(), g_dis_s.ravel()], axis=1))

    model = mb.build()
    idx.check_covers(model.n_vars)
    return ExtensiveForm(model, idx, np.concatenate(groups).reshape(-1, 4), options)
