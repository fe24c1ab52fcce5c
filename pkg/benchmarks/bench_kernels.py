"""Compiled kernels vs the numpy fallback.

    python3 benchmarks/bench_kernels.py            # kernels + 3-bus LP, both backends
    python3 benchmarks/bench_kernels.py --repeat 50

The per-kernel timings call both implementations in one process. The LP
timing runs the simplex in two subprocesses, one with SDED_NUMBA=0, because
the backend is fixed when ``sded._kernels`` is imported.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from sded import _kernels as K

LP_SNIPPET = """
import sys, timeit
from sded import _kernels as K
from sded.grid import bundled_case
from sded.formulation import build_extensive_form
from sded.milp import lp_relax_solve
from sded.scenarios import build_scenario_paths, disaggregate_to_buses, load_percentile_forecasts
from sded.grid import bundled_case_path
data = bundled_case_path("three_bus").parent
case = bundled_case("three_bus")
paths = build_scenario_paths(load_percentile_forecasts(data / "three_bus_load.csv"),
                             load_percentile_forecasts(data / "three_bus_wind.csv"), 10, "rank", 1)
form = build_extensive_form(case, disaggregate_to_buses(paths, case, 0.1, 1, 0.75, 0.625))
lp_relax_solve(form.model)  # warm-up / compile
n = int(sys.argv[1])
t = min(timeit.repeat(lambda: lp_relax_solve(form.model), number=1, repeat=n))
print(K.BACKEND, form.model.n_vars, form.model.n_rows, t)
"""


def kernel_inputs(rng, n=4000, m=1500):
    d = rng.normal(size=n)
    status = rng.integers(0, 4, n)
    x = rng.uniform(0, 5, m)
    alpha = rng.normal(size=m)
    lb = np.zeros(m)
    ub = x + rng.uniform(0, 3, m)
    ids = rng.permutation(m).astype(np.int64)
    rows = rng.integers(0, m, 60).astype(np.int64)
    etas = rng.normal(size=(60, m))
    support = np.sort(rng.uniform(0, 2, 99))
    probs = rng.dirichlet(np.ones(99))
    return {
        "select_entering": (lambda f: f(d, status, 1e-9, False),
                            K.select_entering_jit, K._select_entering_numpy),
        "ratio_test": (lambda f: f(x, alpha, lb, ub, 1, 1e-9, False, ids),
                       K.ratio_test_jit, K._ratio_test_numpy),
        "eta_ftran": (lambda f: f(x.copy(), rows, etas, 60), K.eta_ftran_jit, K._eta_ftran_numpy),
        "eta_btran": (lambda f: f(x.copy(), rows, etas, 60), K.eta_btran_jit, K._eta_btran_numpy),
        "stratify k=50": (lambda f: f(support, probs, 50), K.stratify_jit, K._stratify_numpy),
    }


def bench_kernels(repeat):
    if not K.HAVE_NUMBA:
        print("numba not importable: only the numpy path is available")
        return
    print(f"{'kernel':<16}{'numba us':>12}{'numpy us':>12}{'speedup':>10}")
    for name, (call, jit, ref) in kernel_inputs(np.random.default_rng(0)).items():
        call(jit)  # compile outside the timing
        t_jit = min(timeit.repeat(lambda: call(jit), number=20, repeat=repeat)) / 20
        t_np = min(timeit.repeat(lambda: call(ref), number=20, repeat=repeat)) / 20
        print(f"{name:<16}{t_jit * 1e6:12.1f}{t_np * 1e6:12.1f}{t_np / t_jit:10.2f}")


def bench_lp(repeat):
    print(f"\n{'LP backend':<16}{'vars':>6}{'rows':>6}{'best ms':>10}")
    for flag in ("1", "0"):
        env = dict(os.environ, SDED_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", LP_SNIPPET, str(repeat)], env=env,
                             capture_output=True, text=True, check=True).stdout.split()
        backend, n_vars, n_rows, t = out
        print(f"{backend:<16}{n_vars:>6}{n_rows:>6}{float(t) * 1e3:10.2f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    bench_kernels(args.repeat)
    bench_lp(max(3, args.repeat // 4))


if __name__ == "__main__":
    main()
