import os

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from conftest import three_bus_form
from sded.errors import BackendFailure, DimensionMismatch, IoError, NoFeasibleFound, TooManyBinaries
from sded.milp import (
    BUNDLED_BACKEND, EQ, GE, INFEASIBLE, LE, OPTIMAL, UNBOUNDED, MilpModel, ModelBuilder,
    branch_and_bound, complementarity_fastpath, dual_objective, enumerate_solve, highs_milp_solve,
    LpSolution, lp_relax_solve, read_mps, solve_external, write_mps,
)
from sded.milp.mps import names_table_path


def model_from_dense(c, A, sense, rhs, lb, ub, binary=None, **kw):
    A = np.asarray(A, float)
    r, k = np.nonzero(A)
    n = len(c)
    return MilpModel(c, lb, ub, np.zeros(n, bool) if binary is None else binary, r, k, A[r, k],
                     sense, rhs, **kw)


# -- LP --------------------------------------------------------------------------------


def test_lp_single_bound():
    m = model_from_dense([1.0], [[1.0]], [GE], [1.0], [0.0], [10.0])
    sol = lp_relax_solve(m)
    assert sol.status == OPTIMAL and sol.objective == pytest.approx(1.0)


def test_lp_contradiction_is_infeasible():
    m = model_from_dense([1.0], [[1.0], [1.0]], [GE, LE], [2.0, 1.0], [0.0], [np.inf])
    assert lp_relax_solve(m).status == INFEASIBLE


def test_lp_unbounded():
    m = model_from_dense([-1.0, 0.0], [[1.0, -1.0]], [LE], [0.0], [0.0, 0.0], [np.inf, np.inf])
    assert lp_relax_solve(m).status == UNBOUNDED


def test_degenerate_flow_with_ties_terminates():
    # max flow s->t over four parallel two-hop paths, all capacities equal
    n_paths = 4
    c = np.zeros(2 * n_paths)
    c[:n_paths] = -1.0
    A = np.zeros((n_paths, 2 * n_paths))
    for p in range(n_paths):
        A[p, p], A[p, n_paths + p] = 1.0, -1.0  # conservation at the middle node
    m = model_from_dense(c, A, [EQ] * n_paths, np.zeros(n_paths), np.zeros(2 * n_paths), np.ones(2 * n_paths))
    sol = lp_relax_solve(m)
    assert sol.status == OPTIMAL and sol.objective == pytest.approx(-4.0)


@st.composite
def bounded_lps(draw):
    n = draw(st.integers(1, 6))
    m = draw(st.integers(1, 6))
    ints = st.integers(-5, 5)
    A = np.array(draw(st.lists(st.lists(ints, min_size=n, max_size=n), min_size=m, max_size=m)), float)
    c = np.array(draw(st.lists(ints, min_size=n, max_size=n)), float)
    x0 = np.array(draw(st.lists(st.integers(0, 4), min_size=n, max_size=n)), float)
    sense = np.array(draw(st.lists(st.sampled_from([LE, GE, EQ]), min_size=m, max_size=m)))
    slack = np.array(draw(st.lists(st.integers(0, 3), min_size=m, max_size=m)), float)
    act = A @ x0
    rhs = np.where(sense == LE, act + slack, np.where(sense == GE, act - slack, act))
    lb = np.zeros(n)
    ub = np.full(n, 10.0)
    return model_from_dense(c, A, sense, rhs, lb, ub)


@settings(max_examples=150, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(bounded_lps())
def test_simplex_matches_highs_and_strong_duality(m):
    ours = lp_relax_solve(m, "simplex")
    ref = lp_relax_solve(m, "highs")
    assert ours.status == ref.status == OPTIMAL
    assert ours.objective == pytest.approx(ref.objective, rel=1e-7, abs=1e-7)
    assert m.max_violation(ours.x) <= 1e-7
    dual = dual_objective(m, ours)
    assert dual <= ours.objective + 1e-6
    assert dual == pytest.approx(ours.objective, rel=1e-6, abs=1e-6)


@settings(max_examples=60, deadline=None)
@given(bounded_lps(), st.lists(st.floats(-3, 3), min_size=6, max_size=6))
def test_weak_duality_for_any_dual_point(m, y):
    # any y with the right signs gives a lower bound
    y = np.array(y[:m.n_rows])
    y = np.where(m.sense == LE, -np.abs(y), np.where(m.sense == GE, np.abs(y), y))
    bound = dual_objective(m, LpSolution(OPTIMAL, None, np.nan, duals=y))
    assert bound <= lp_relax_solve(m).objective + 1e-7


# -- MILP ------------------------------------------------------------------------------


def test_bnb_pick_one():
    m = model_from_dense([-1.0, -1.0], [[1.0, 1.0]], [LE], [1.0], [0, 0], [1, 1], binary=[True, True])
    sol = branch_and_bound(m)
    assert sol.status == OPTIMAL and sol.objective == pytest.approx(-1.0)


def test_bnb_without_binaries_is_the_lp():
    m = model_from_dense([1.0, 2.0], [[1.0, 1.0]], [GE], [3.0], [0, 0], [2, 2])
    assert branch_and_bound(m).objective == pytest.approx(lp_relax_solve(m).objective)


def test_enumeration_counts_and_infeasible():
    m = model_from_dense([-1.0, -1.0], [[1.0, 1.0]], [LE], [1.0], [0, 0], [1, 1], binary=[True, True])
    sol = enumerate_solve(m)
    assert sol.nodes == 4 and sol.lp_solves == 4 and sol.objective == -1
    assert enumerate_solve(m, prefilter=True).lp_solves == 3
    bad = model_from_dense([1.0], [[1.0]], [GE], [2.0], [0], [1], binary=[True])
    assert enumerate_solve(bad).status == INFEASIBLE
    assert branch_and_bound(bad).status == INFEASIBLE


def test_enumeration_cap():
    n = 21
    m = MilpModel(np.zeros(n), np.zeros(n), np.ones(n), np.ones(n, bool), [], [], [], [], [])
    with pytest.raises(TooManyBinaries):
        enumerate_solve(m)


@st.composite
def small_milps(draw):
    m = draw(bounded_lps())
    binary = np.array(draw(st.lists(st.booleans(), min_size=m.n_vars, max_size=m.n_vars)))
    ub = np.where(binary, 1.0, m.ub)
    return m.with_bounds(ub=ub, binary=binary)


@settings(max_examples=100, deadline=None)
@given(small_milps())
def test_bnb_equals_enumeration(m):
    want = enumerate_solve(m)
    got = branch_and_bound(m, rel_gap=1e-9)
    assert got.status == want.status
    if want.status == OPTIMAL:
        assert got.objective == pytest.approx(want.objective, rel=1e-6, abs=1e-7)
        assert want.objective <= got.objective + 1e-9
        assert m.max_violation(got.x) <= 1e-6


def test_three_bus_solvers_agree():
    case, scen, form = three_bus_form()
    bb = branch_and_bound(form.model)
    fast = complementarity_fastpath(form.model, form.groups)
    hi = highs_milp_solve(form.model, rel_gap=1e-9)
    assert bb.gap <= 1e-6
    for other in (fast, hi):
        assert other.objective == pytest.approx(bb.objective, rel=1e-6)


def test_node_limit_without_incumbent_raises():
    case, scen, form = three_bus_form()
    with pytest.raises(NoFeasibleFound):
        branch_and_bound(form.model, node_limit=1)


# -- model -----------------------------------------------------------------------------


def test_model_validation():
    with pytest.raises(DimensionMismatch):
        MilpModel([1.0], [0.0, 0.0], [1.0], [False], [], [], [], [], [])
    with pytest.raises(ValueError):
        MilpModel([1.0], [2.0], [1.0], [False], [], [], [], [], [])
    with pytest.raises(ValueError):
        MilpModel([1.0], [0.0], [2.0], [True], [], [], [], [], [])


def test_builder_blocks():
    b = ModelBuilder()
    x = b.add_vars("x", (2, 3), ub=5.0, cost=1.0)
    rows = b.add_rows("sum", [(x, 1.0)], GE, 1.0)
    b.add_entries(rows[0, :1], x[1, :1], 2.0)
    m = b.build()
    assert m.n_vars == 6 and m.n_rows == 6
    assert m.var_names[4] == "x[1,1]"
    assert m.A[0, 3] == 2.0


# -- MPS -------------------------------------------------------------------------------


def test_mps_round_trip_tiny(tmp_path):
    m = model_from_dense([1.0], [[1.0]], [GE], [1.0], [0.0], [np.inf], var_names=("x",), row_names=("c1",))
    write_mps(m, tmp_path / "tiny.mps")
    assert read_mps(tmp_path / "tiny.mps").same_as(m)
    assert not names_table_path(tmp_path / "tiny.mps").exists()


def test_mps_long_names_get_a_table(tmp_path):
    case, scen, form = three_bus_form()
    a = write_mps(form.model, tmp_path / "a.mps")
    b = write_mps(form.model, tmp_path / "b.mps")
    assert names_table_path(a).read_text() == names_table_path(b).read_text()
    assert a.read_text() == b.read_text()
    assert read_mps(a).same_as(form.model)
    assert read_mps(a, restore_names=False).var_names[0] == "C0000001"


@settings(max_examples=50, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(small_milps(), st.floats(-1e6, 1e6, allow_nan=False), st.floats(1e-12, 1e12))
def test_mps_round_trip_random(tmp_path, m, offset, scale):
    m = MilpModel(m.c * scale, m.lb, m.ub, m.binary, m.rows, m.cols, m.vals / scale, m.sense, m.rhs,
                  obj_offset=offset)
    path = write_mps(m, tmp_path / "r.mps")
    assert read_mps(path).same_as(m)


def test_mps_errors(tmp_path):
    with pytest.raises(IoError):
        read_mps(tmp_path / "missing.mps")


# -- external backends -----------------------------------------------------------------


def test_bundled_backend_matches_internal():
    case, scen, form = three_bus_form()
    ext = solve_external(form.model, BUNDLED_BACKEND)
    assert ext.objective == pytest.approx(branch_and_bound(form.model).objective, rel=1e-6)
    assert form.model.max_violation(ext.x) <= 1e-6


@pytest.mark.skipif(not os.environ.get("SDED_EXTERNAL_SOLVER"), reason="no external backend configured")
def test_configured_external_backend():
    case, scen, form = three_bus_form()
    ext = solve_external(form.model, os.environ["SDED_EXTERNAL_SOLVER"])
    assert ext.objective == pytest.approx(branch_and_bound(form.model).objective, rel=1e-6)


def test_backend_failures(tmp_path):
    m = model_from_dense([1.0], [[1.0]], [GE], [1.0], [0.0], [5.0])
    with pytest.raises(BackendFailure):
        solve_external(m, "false")
    with pytest.raises(BackendFailure):
        solve_external(m, "definitely-not-a-command-xyz")
    script = tmp_path / "garbage.sh"
    script.write_text('#!/bin/sh\necho "nonsense here" > "$2"\n')
    script.chmod(0o755)
    with pytest.raises(BackendFailure):
        solve_external(m, str(script))
