"""Two-stage stochastic dynamic economic dispatch with battery storage.

Subpackages and modules: ``grid`` (network cases), ``scenarios`` (percentile
forecasts to weighted scenarios), ``formulation`` (extensive-form MILP,
solution extraction and constraint replay), ``milp`` (simplex,
branch-and-bound, MPS I/O, HiGHS bridges), ``experiments`` (storage-size
sweeps) and ``cli``.
"""
__version__ = "0.1.0"
