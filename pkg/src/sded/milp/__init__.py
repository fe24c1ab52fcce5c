"""MILP container, in-tree simplex / branch-and-bound, enumeration oracle, MPS I/O."""
from .bnb import (
    LIMIT, MipSolution, branch_and_bound, complementarity_fastpath, enumerate_solve, relative_gap,
)
from .external import BUNDLED_BACKEND, command_available, solve_external
from .highs import highs_milp_solve
from .model import EQ, GE, LE, MilpModel, ModelBuilder
from .mps import read_mps, write_mps
from .simplex import INFEASIBLE, OPTIMAL, UNBOUNDED, LpSolution, dual_objective, lp_relax_solve

__all__ = [
    "EQ", "GE", "LE", "INFEASIBLE", "LIMIT", "OPTIMAL", "UNBOUNDED", "BUNDLED_BACKEND",
    "LpSolution", "MilpModel", "MipSolution", "ModelBuilder",
    "branch_and_bound", "command_available", "complementarity_fastpath", "dual_objective",
    "enumerate_solve", "highs_milp_solve", "lp_relax_solve", "read_mps", "relative_gap",
    "solve_external", "write_mps",
]
