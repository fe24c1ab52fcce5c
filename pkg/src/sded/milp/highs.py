"""Whole-MILP solve through scipy's HiGHS interface, for models too large for the in-tree simplex."""
from __future__ import annotations

import time
from typing import Optional

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from ..errors import NoFeasibleFound
from .bnb import LIMIT, MipSolution, relative_gap
from .model import EQ, GE, LE, MilpModel
from .simplex import INFEASIBLE, OPTIMAL, UNBOUNDED, highs_lp_solve


def highs_milp_solve(model: MilpModel, rel_gap: float = 1e-4,
                     time_limit: Optional[float] = None) -> MipSolution:
    start = time.perf_counter()
    lo = np.where(model.sense == LE, -np.inf, model.rhs)
    hi = np.where(model.sense == GE, np.inf, model.rhs)
    options = {"mip_rel_gap": rel_gap, "presolve": True}
    if time_limit is not None:
        options["time_limit"] = float(time_limit)
    constraints = [LinearConstraint(model.A, lo, hi)] if model.n_rows else []
    res = milp(
        model.c, constraints=constraints, integrality=model.binary.astype(int),
        bounds=Bounds(model.lb, model.ub), options=options,
    )
    wall = time.perf_counter() - start
    nodes = int(getattr(res, "mip_node_count", 0) or 0)
    if res.status == 2:
        return MipSolution(INFEASIBLE, None, np.inf, np.inf, np.inf, nodes, wall_time=wall)
    if res.status == 3:
        return MipSolution(UNBOUNDED, None, -np.inf, -np.inf, np.inf, nodes, wall_time=wall)
    if res.x is None:
        raise NoFeasibleFound(f"HiGHS stopped without a solution: {res.message}")
    x = np.array(res.x)
    rounded = np.round(x[model.binary])
    if np.any(rounded != x[model.binary]):
        # re-solve with binaries pinned so gated rows hold exactly, not to HiGHS tolerance
        lb, ub = model.lb.copy(), model.ub.copy()
        lb[model.binary] = ub[model.binary] = rounded
        fixed = highs_lp_solve(model, lb, ub)
        if fixed.status == OPTIMAL:
            x = fixed.x
        x[model.binary] = rounded
    obj = model.objective(x)
    bound = getattr(res, "mip_dual_bound", None)
    bound = obj if bound is None or not np.isfinite(bound) else float(bound) + model.obj_offset
    bound = min(bound, obj)
    gap = relative_gap(obj, bound)
    status = OPTIMAL if res.status == 0 else LIMIT
    return MipSolution(status, x, obj, bound, gap, nodes, wall_time=wall)
