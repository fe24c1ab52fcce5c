"""Extensive-form model construction, solution extraction and constraint replay."""
from .build import ExtensiveForm, FormulationOptions, build_extensive_form
from .costs import CostParams, pwl_breakpoints, pwl_cost
from .index import VarIndex
from .solution import DispatchSolution, cost_breakdown, extract_solution
from .verify import FAMILIES, VerificationReport, verify_solution

__all__ = [
    "CostParams", "DispatchSolution", "ExtensiveForm", "FAMILIES", "FormulationOptions",
    "VarIndex", "VerificationReport", "build_extensive_form", "cost_breakdown",
    "extract_solution", "pwl_breakpoints", "pwl_cost", "verify_solution",
]
