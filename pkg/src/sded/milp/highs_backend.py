"""Reference external backend: ``python -m sded.milp.highs_backend model.mps solution.out``.

Reads the MPS file with the in-tree parser (names as written in the file),
solves it with HiGHS and writes the solution-file contract.
"""
import sys

from .highs import highs_milp_solve
from .mps import read_mps


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 2:
        print("usage: python -m sded.milp.highs_backend MODEL.mps SOLUTION.out", file=sys.stderr)
        return 2
    model = read_mps(argv[0], restore_names=False)
    sol = highs_milp_solve(model, rel_gap=1e-9)
    with open(argv[1], "w") as fh:
        if sol.x is None:
            fh.write(f"status {sol.status}\n")
            return 0
        fh.write(f"objective {sol.objective!r}\n")
        for name, value in zip(model.var_names, sol.x):
            fh.write(f"var {name} {float(value)!r}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
