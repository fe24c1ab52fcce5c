"""Pick a MILP solver by name and run it on a built extensive form.

Names: ``internal`` (in-tree branch-and-bound), ``internal-fastpath``
(drop storage mode binaries first, fall back to branch-and-bound),
``enumerate`` (exhaustive oracle), ``highs`` (scipy's HiGHS MILP) and
``external:<command>`` (MPS subprocess; ``external`` alone uses the bundled
HiGHS backend).
"""
from __future__ import annotations

from typing import Optional

from .errors import BackendFailure, NoFeasibleFound, SolveFailure
from .formulation.build import ExtensiveForm
from .milp import (
    BUNDLED_BACKEND, LIMIT, OPTIMAL, MipSolution, branch_and_bound, complementarity_fastpath,
    enumerate_solve, highs_milp_solve, solve_external,
)

SOLVERS = ("internal", "internal-fastpath", "enumerate", "highs", "external")


def check_solver_name(solver: str) -> None:
    base = solver.split(":", 1)[0]
    if base not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}; expected one of {SOLVERS} (external:<cmd>)")


def solve(form: ExtensiveForm, solver: str = "internal", rel_gap: Optional[float] = None,
          time_limit: Optional[float] = None, node_limit: Optional[int] = None,
          lp_engine: str = "simplex") -> MipSolution:
    """Solve and return the MipSolution; raise SolveFailure unless a solution exists."""
    check_solver_name(solver)
    model = form.model
    try:
        if solver == "internal":
            sol = branch_and_bound(model, rel_gap or 1e-6, node_limit, time_limit, lp_engine)
        elif solver == "internal-fastpath":
            sol = complementarity_fastpath(model, form.groups, rel_gap or 1e-6, node_limit,
                                           time_limit, lp_engine)
        elif solver == "enumerate":
            sol = enumerate_solve(model, lp_engine)
        elif solver == "highs":
            sol = highs_milp_solve(model, rel_gap or 1e-4, time_limit)
        else:
            command = solver.split(":", 1)[1] if ":" in solver else BUNDLED_BACKEND
            sol = solve_external(model, command, timeout=time_limit)
    except (NoFeasibleFound, BackendFailure) as exc:
        raise SolveFailure(str(exc)) from exc
    if sol.status not in (OPTIMAL, LIMIT) or not sol.has_solution:
        raise SolveFailure(f"{solver} solver finished with status {sol.status!r}")
    return sol
