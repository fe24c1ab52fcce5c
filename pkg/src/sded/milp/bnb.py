"""Branch-and-bound over binaries, the exhaustive enumeration oracle, and the
complementarity fast path used for storage mode binaries."""
from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import NoFeasibleFound, TooManyBinaries
from .model import MilpModel
from .simplex import INFEASIBLE, LP_ENGINES, OPTIMAL, UNBOUNDED

LIMIT = "limit"
INT_TOL = 1e-6
MAX_ENUMERATION_BINARIES = 20


@dataclass
class MipSolution:
    status: str
    x: Optional[np.ndarray]
    objective: float
    bound: float
    gap: float
    nodes: int = 0
    lp_solves: int = 0
    trace: list = field(default_factory=list, repr=False)
    wall_time: float = 0.0

    @property
    def has_solution(self) -> bool:
        return self.x is not None


def relative_gap(objective: float, bound: float) -> float:
    if not np.isfinite(objective):
        return np.inf
    return (objective - bound) / max(1.0, abs(objective))


def _polish(model, x, lp, binaries):
    """Re-solve with binaries fixed at their rounded values to remove integrality noise."""
    rounded = np.round(x[binaries])
    if np.array_equal(rounded, x[binaries]):
        return x, model.objective(x)
    lb = model.lb.copy()
    ub = model.ub.copy()
    lb[binaries] = ub[binaries] = rounded
    sol = lp(model, lb, ub)
    if sol.status != OPTIMAL:
        x = x.copy()
        x[binaries] = rounded
        return x, model.objective(x)
    return sol.x, sol.objective


def branch_and_bound(
    model: MilpModel,
    rel_gap: float = 1e-6,
    node_limit: Optional[int] = None,
    time_limit: Optional[float] = None,
    lp_engine: str = "simplex",
    priority=None,
) -> MipSolution:
    """Best-bound branch-and-bound, branching on the most fractional binary.

    Columns listed in ``priority`` are branched on first whenever any of them
    is fractional. Node ties are broken by creation order, so the search is
    deterministic.
    """
    lp = LP_ENGINES[lp_engine]
    start = time.perf_counter()
    binaries = np.flatnonzero(model.binary)
    prio = np.asarray([] if priority is None else priority, dtype=np.int64)
    lp_solves = 0

    def solve(lb, ub):
        nonlocal lp_solves
        lp_solves += 1
        return lp(model, lb, ub)

    def fractional(x):
        vals = x[binaries]
        return binaries[np.minimum(vals - np.floor(vals), np.ceil(vals) - vals) > INT_TOL]

    def pick(frac, x):
        preferred = frac[np.isin(frac, prio)] if prio.size else frac[:0]
        pool = preferred if preferred.size else frac
        score = np.abs(x[pool] - 0.5)
        return int(pool[np.argmin(score)])

    root = solve(model.lb.copy(), model.ub.copy())
    if root.status == INFEASIBLE:
        return MipSolution(INFEASIBLE, None, np.inf, np.inf, np.inf, 1, lp_solves,
                           wall_time=time.perf_counter() - start)
    if root.status == UNBOUNDED:
        return MipSolution(UNBOUNDED, None, -np.inf, -np.inf, np.inf, 1, lp_solves,
                           wall_time=time.perf_counter() - start)

    incumbent = np.inf
    x_best = None
    nodes = 1
    counter = itertools.count()
    heap = []
    trace = []

    def offer(sol, lb, ub, parent_bound):
        nonlocal incumbent, x_best
        bound = max(sol.objective, parent_bound)
        frac = fractional(sol.x)
        if frac.size == 0:
            x, obj = _polish(model, sol.x, lp, binaries)
            if obj < incumbent:
                incumbent, x_best = obj, x
            return
        if bound < incumbent - rel_gap * max(1.0, abs(incumbent)) or not np.isfinite(incumbent):
            heapq.heappush(heap, (bound, next(counter), lb, ub, sol.x))

    offer(root, model.lb.copy(), model.ub.copy(), -np.inf)
    hit_limit = False
    while True:
        bound = heap[0][0] if heap else incumbent
        bound = min(bound, incumbent)
        trace.append((nodes, bound, incumbent))
        if not heap or relative_gap(incumbent, bound) <= rel_gap:
            break
        if node_limit is not None and nodes >= node_limit:
            hit_limit = True
            break
        if time_limit is not None and time.perf_counter() - start > time_limit:
            hit_limit = True
            break
        node_bound, _, lb, ub, x = heapq.heappop(heap)
        if node_bound >= incumbent - rel_gap * max(1.0, abs(incumbent)):
            continue
        j = pick(fractional(x), x)
        for value in (0.0, 1.0):
            clb, cub = lb.copy(), ub.copy()
            clb[j] = cub[j] = value
            child = solve(clb, cub)
            nodes += 1
            if child.status == OPTIMAL:
                offer(child, clb, cub, node_bound)

    wall = time.perf_counter() - start
    if x_best is None:
        if hit_limit:
            raise NoFeasibleFound(f"no integer solution after {nodes} nodes")
        return MipSolution(INFEASIBLE, None, np.inf, np.inf, np.inf, nodes, lp_solves, trace, wall)
    bound = min(heap[0][0] if heap else incumbent, incumbent)
    gap = relative_gap(incumbent, bound)
    status = OPTIMAL if gap <= rel_gap else LIMIT
    return MipSolution(status, x_best, incumbent, bound, gap, nodes, lp_solves, trace, wall)


def _pure_binary_rows(model: MilpModel):
    """Rows whose every coefficient sits on a binary column, as (row ids, dense sub-matrix)."""
    A = model.A.tocsr()
    touches_cont = np.zeros(model.n_rows, bool)
    coo = A.tocoo()
    touches_cont[coo.row[~model.binary[coo.col]]] = True
    rows = np.flatnonzero(~touches_cont & (np.diff(A.indptr) > 0))
    return rows, A[rows][:, np.flatnonzero(model.binary)].toarray()


def enumerate_solve(model: MilpModel, lp_engine: str = "simplex",
                    max_binaries: int = MAX_ENUMERATION_BINARIES,
                    prefilter: bool = False) -> MipSolution:
    """Exact MILP optimum by fixing every binary assignment and solving each LP.

    With ``prefilter`` an assignment that already breaks a row containing
    only binaries (or a binary's own bounds) is rejected without an LP solve.
    """
    start = time.perf_counter()
    lp = LP_ENGINES[lp_engine]
    binaries = np.flatnonzero(model.binary)
    nb = binaries.size
    if nb > max_binaries:
        raise TooManyBinaries(f"{nb} binaries exceeds the enumeration cap of {max_binaries}")
    rows, sub = _pure_binary_rows(model) if prefilter else (np.zeros(0, np.int64), None)
    sense = model.sense[rows]
    rhs = model.rhs[rows]
    blo, bhi = model.lb[binaries], model.ub[binaries]

    best = np.inf
    x_best = None
    lp_solves = 0
    assignments = 0
    for bits in itertools.product((0.0, 1.0), repeat=nb):
        assignments += 1
        v = np.asarray(bits)
        if prefilter and (np.any(v < blo) or np.any(v > bhi)):
            continue
        if rows.size:
            act = sub @ v
            if (np.any(act[sense == "L"] > rhs[sense == "L"] + 1e-9)
                    or np.any(act[sense == "G"] < rhs[sense == "G"] - 1e-9)
                    or np.any(np.abs(act[sense == "E"] - rhs[sense == "E"]) > 1e-9)):
                continue
        lb = model.lb.copy()
        ub = model.ub.copy()
        lb[binaries] = ub[binaries] = v
        sol = lp(model, lb, ub)
        lp_solves += 1
        if sol.status == UNBOUNDED:
            return MipSolution(UNBOUNDED, None, -np.inf, -np.inf, np.inf, assignments, lp_solves,
                               wall_time=time.perf_counter() - start)
        if sol.status == OPTIMAL and sol.objective < best:
            best, x_best = sol.objective, sol.x
    wall = time.perf_counter() - start
    if x_best is None:
        return MipSolution(INFEASIBLE, None, np.inf, np.inf, np.inf, assignments, lp_solves, wall_time=wall)
    return MipSolution(OPTIMAL, x_best, best, best, 0.0, assignments, lp_solves, wall_time=wall)


def complementarity_fastpath(
    model: MilpModel,
    groups,
    rel_gap: float = 1e-6,
    node_limit: Optional[int] = None,
    time_limit: Optional[float] = None,
    lp_engine: str = "simplex",
    tol: float = 1e-6,
) -> MipSolution:
    """Solve a storage MILP by first dropping its mode binaries.

    ``groups`` holds rows ``(charge, discharge, gamma_charge, gamma_discharge)``
    of column ids. The mode binaries and every row that touches them are
    removed and the remaining LP solved. If no unit charges and discharges
    at once the LP point, completed with matching binaries, is optimal for
    the MILP (the binaries carry no cost, so the LP is a relaxation).
    Otherwise branch-and-bound runs on the full model with the violating
    units' binaries branched first.
    """
    start = time.perf_counter()
    groups = np.asarray(groups, dtype=np.int64).reshape(-1, 4)
    gammas = groups[:, 2:].ravel()
    bb = lambda prio: branch_and_bound(model, rel_gap, node_limit, time_limit, lp_engine, prio)
    if groups.size == 0 or np.any(model.c[gammas] != 0):
        return bb(None)

    touching = np.unique(model.rows[np.isin(model.cols, gammas)])
    reduced = model.drop(var_ids=gammas, row_ids=touching)
    sol = LP_ENGINES[lp_engine](reduced)
    if sol.status != OPTIMAL:
        return MipSolution(sol.status, None, np.inf if sol.status == INFEASIBLE else -np.inf,
                           np.inf, np.inf, 1, 1, wall_time=time.perf_counter() - start)
    keep = np.ones(model.n_vars, bool)
    keep[gammas] = False
    x = np.zeros(model.n_vars)
    x[keep] = sol.x
    ch, dis = x[groups[:, 0]], x[groups[:, 1]]
    clash = (ch > tol) & (dis > tol)
    if not clash.any():
        x[groups[:, 2]] = (ch > 0).astype(float)
        x[groups[:, 3]] = (dis > 0).astype(float)
        if model.max_violation(x) <= 1e-6:
            obj = model.objective(x)
            return MipSolution(OPTIMAL, x, obj, sol.objective, relative_gap(obj, sol.objective),
                               1, 1, [(1, sol.objective, obj)], time.perf_counter() - start)
    result = bb(groups[clash, 2:].ravel())
    result.lp_solves += 1
    result.wall_time = time.perf_counter() - start
    return result
