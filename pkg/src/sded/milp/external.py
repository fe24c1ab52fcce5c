"""Solve through an external command speaking the MPS / solution-file contract.

The command is run as ``<cmd...> <model.mps> <solution.out>``. The solution
file holds ``objective <value>`` followed by ``var <name> <value>`` lines
(names as they appear in the MPS file); an optional ``status <word>`` line
may report ``infeasible`` or ``unbounded``.
"""
from __future__ import annotations

import shlex
import shutil
import subprocess
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from ..errors import BackendFailure
from .bnb import MipSolution
from .model import MilpModel
from .mps import mangled_names, write_mps
from .simplex import INFEASIBLE, OPTIMAL, UNBOUNDED

BUNDLED_BACKEND = f"{shlex.quote(sys.executable)} -m sded.milp.highs_backend"


def command_available(command: str) -> bool:
    try:
        argv = shlex.split(command)
    except ValueError:
        return False
    return bool(argv) and shutil.which(argv[0]) is not None


def parse_solution(path, model: MilpModel) -> MipSolution:
    cols, _, _ = mangled_names(model)
    index = {name: j for j, name in enumerate(cols)}
    x = np.zeros(model.n_vars)
    objective = None
    status = OPTIMAL
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise BackendFailure(f"backend wrote no solution file: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        try:
            if parts[0] == "objective":
                objective = float(parts[1])
            elif parts[0] == "status":
                status = parts[1].lower()
            elif parts[0] == "var":
                x[index[parts[1]]] = float(parts[2])
            else:
                raise ValueError(f"unknown record {parts[0]!r}")
        except (IndexError, KeyError, ValueError) as exc:
            raise BackendFailure(f"unparsable solution line {lineno}: {line!r} ({exc})") from None
    if status in (INFEASIBLE, UNBOUNDED):
        inf = np.inf if status == INFEASIBLE else -np.inf
        return MipSolution(status, None, inf, inf, np.inf)
    if objective is None:
        raise BackendFailure("solution file has no objective line")
    return MipSolution(OPTIMAL, x, objective, objective, 0.0)


def solve_external(model: MilpModel, backend_command: str, timeout=None, workdir=None) -> MipSolution:
    start = time.perf_counter()
    argv = shlex.split(backend_command)
    if not argv:
        raise BackendFailure("empty backend command")
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        mps_path = Path(tmp) / "model.mps"
        sol_path = Path(tmp) / "solution.out"
        write_mps(model, mps_path)
        try:
            proc = subprocess.run(argv + [str(mps_path), str(sol_path)], capture_output=True,
                                  text=True, timeout=timeout)
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise BackendFailure(f"cannot run {argv[0]}: {exc}") from None
        if proc.returncode != 0:
            raise BackendFailure(f"backend exited with {proc.returncode}: {proc.stderr.strip()[-500:]}")
        sol = parse_solution(sol_path, model)
    sol.wall_time = time.perf_counter() - start
    return sol
