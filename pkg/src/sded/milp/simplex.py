"""Bounded-variable revised primal simplex.

Rows are turned into equalities ``A x + s = b`` with one logical column per
row whose bounds encode the sense (``<=``: s >= 0, ``>=``: s <= 0, ``=``:
s = 0). A crash basis uses those logicals wherever the starting point already
satisfies the row and an artificial column otherwise; phase I drives the
artificials to zero.

The basis inverse is kept as an LU factorization plus a product-form eta
file, refactorized every ``REFACTOR_EVERY`` pivots. Pricing is Dantzig's
rule; after a run of degenerate pivots it switches to Bland's rule until a
nondegenerate pivot is made, which rules out cycling.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg.lapack import dgetrs as _getrs

from .. import _kernels as K
from ..errors import NumericalFailure
from .model import EQ, GE, LE, MilpModel

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

FIXED = 4  # nonbasic with lb == ub; never priced

REFACTOR_EVERY = 50
DEGENERATE_BEFORE_BLAND = 25
PIVOT_TOL = 1e-9
FEAS_TOL = 1e-8
OPT_TOL = 1e-9
DENSE_LIMIT = 1500


@dataclass
class LpSolution:
    status: str
    x: Optional[np.ndarray]
    objective: float
    duals: Optional[np.ndarray] = None
    reduced_costs: Optional[np.ndarray] = None
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


class _Basis:
    def __init__(self, columns: sp.csc_matrix):
        self.columns = columns
        self.m = columns.shape[0]
        self.eta_rows = np.zeros(REFACTOR_EVERY + 1, dtype=np.int64)
        self.eta_cols = np.zeros((REFACTOR_EVERY + 1, self.m))
        self.n_etas = 0

    def refactor(self, basic):
        B = self.columns[:, basic]
        self.n_etas = 0
        try:
            if self.m <= DENSE_LIMIT:
                self._dense = True
                lu, piv = sla.lu_factor(B.toarray(), check_finite=False)
                if np.min(np.abs(np.diag(lu))) < 1e-13:
                    raise NumericalFailure("singular basis")
                self._lu = (lu, piv)
            else:
                self._dense = False
                self._lu = spla.splu(B.tocsc())
        except (RuntimeError, ValueError) as exc:
            raise NumericalFailure(f"basis factorization failed: {exc}") from None

    def _solve(self, rhs, trans=False):
        if self._dense:
            x, info = _getrs(self._lu[0], self._lu[1], rhs, trans=1 if trans else 0)
            return x
        return self._lu.solve(rhs, trans="T" if trans else "N")

    def ftran(self, a):
        return K.eta_ftran(self._solve(a), self.eta_rows, self.eta_cols, self.n_etas)

    def btran(self, c):
        w = K.eta_btran(np.array(c, dtype=float), self.eta_rows, self.eta_cols, self.n_etas)
        return self._solve(w, trans=True)

    def update(self, r, alpha):
        eta = self.eta_cols[self.n_etas]
        np.divide(-alpha, alpha[r], out=eta)
        eta[r] = 1.0 / alpha[r]
        self.eta_rows[self.n_etas] = r
        self.n_etas += 1


class _Simplex:
    def __init__(self, model: MilpModel, lb=None, ub=None):
        A = model.A.tocsc()
        m, n = A.shape
        self.m, self.n = m, n
        self.b = np.array(model.rhs, float)
        lb = np.array(model.lb if lb is None else lb, float)
        ub = np.array(model.ub if ub is None else ub, float)

        slack_lb = np.where(model.sense == GE, -np.inf, 0.0)
        slack_ub = np.where(model.sense == LE, np.inf, 0.0)

        x = np.where(np.isfinite(lb), lb, np.where(np.isfinite(ub), ub, 0.0))
        resid = self.b - A @ x
        use_slack = (
            ((model.sense == LE) & (resid >= 0))
            | ((model.sense == GE) & (resid <= 0))
            | ((model.sense == EQ) & (resid == 0))
        )
        art_sign = np.where(resid < 0, -1.0, 1.0)

        eye = sp.identity(m, format="csc")
        self.columns = sp.hstack([A, eye, sp.diags(art_sign, format="csc")], format="csc")
        self.At = self.columns.T.tocsr()
        self.N = n + 2 * m

        self.lb = np.concatenate([lb, slack_lb, np.zeros(m)])
        self.ub = np.concatenate([ub, slack_ub, np.where(use_slack, 0.0, np.inf)])
        self.x = np.concatenate([x, np.zeros(m), np.zeros(m)])
        rows = np.arange(m)
        self.basic = np.where(use_slack, n + rows, n + m + rows).astype(np.int64)
        self.x[self.basic] = np.where(use_slack, resid, np.abs(resid))

        self.status = np.empty(self.N, dtype=np.int64)
        self._reset_status()
        self.status[self.basic] = K.BASIC
        self.basis = _Basis(self.columns)
        self.basis.refactor(self.basic)
        self.xB = self.x[self.basic].copy()
        self.iterations = 0
        self.max_iterations = 50 * (self.N + m) + 1000
        self.c = np.concatenate([np.array(model.c, float), np.zeros(2 * m)])
        self.phase1_cost = np.concatenate([np.zeros(n + m), np.ones(m)])
        self.cost_scale = max(1.0, float(np.max(np.abs(model.c), initial=0.0)))

    def _column(self, j):
        cols = self.columns
        a = np.zeros(self.m)
        lo, hi = cols.indptr[j], cols.indptr[j + 1]
        a[cols.indices[lo:hi]] = cols.data[lo:hi]
        return a

    def _reset_status(self):
        lb, ub, x = self.lb, self.ub, self.x
        st = np.full(self.N, K.FREE_ZERO, dtype=np.int64)
        st[np.isfinite(lb) & (x == lb)] = K.AT_LOWER
        st[np.isfinite(ub) & (x == ub) & (x != lb)] = K.AT_UPPER
        st[lb == ub] = FIXED
        self.status = st

    def _refactor(self):
        self.basis.refactor(self.basic)
        xn = self.x.copy()
        xn[self.basic] = 0.0
        self.xB = self.basis.ftran(self.b - self.columns @ xn)

    def _iterate(self, cost, tol):
        degenerate = 0
        bland = False
        while True:
            if self.iterations >= self.max_iterations:
                raise NumericalFailure(f"simplex iteration limit ({self.max_iterations}) reached")
            if self.basis.n_etas >= REFACTOR_EVERY:
                self._refactor()
            y = self.basis.btran(cost[self.basic])
            d = cost - self.At @ y
            j, direction = K.select_entering(d, self.status, tol, bland)
            if j < 0:
                return OPTIMAL, y, d
            self.iterations += 1
            a = self._column(j)
            alpha = self.basis.ftran(a)
            lbB = self.lb[self.basic]
            ubB = self.ub[self.basic]
            row, step, to_upper = K.ratio_test(
                self.xB, alpha, lbB, ubB, direction, PIVOT_TOL, bland, self.basic
            )
            span = self.ub[j] - self.lb[j]
            if span <= step and span < np.inf:
                # bound flip, basis unchanged
                self.xB -= direction * span * alpha
                if direction > 0:
                    self.x[j] = self.ub[j]
                    self.status[j] = K.AT_UPPER
                else:
                    self.x[j] = self.lb[j]
                    self.status[j] = K.AT_LOWER
                degenerate = 0
                bland = False
                continue
            if row < 0:
                return UNBOUNDED, y, d
            if abs(alpha[row]) < PIVOT_TOL:
                raise NumericalFailure("pivot element below tolerance")
            if step <= 1e-12:
                degenerate += 1
                if degenerate > DEGENERATE_BEFORE_BLAND:
                    bland = True
            else:
                degenerate = 0
                bland = False
            self.xB -= direction * step * alpha
            leaving = self.basic[row]
            self.x[leaving] = self.ub[leaving] if to_upper else self.lb[leaving]
            if self.lb[leaving] == self.ub[leaving]:
                self.status[leaving] = FIXED
            else:
                self.status[leaving] = K.AT_UPPER if to_upper else K.AT_LOWER
            self.xB[row] = self.x[j] + direction * step
            self.basic[row] = j
            self.status[j] = K.BASIC
            self.basis.update(row, alpha)

    def solve(self) -> LpSolution:
        m, n = self.m, self.n
        art = np.arange(n + m, n + 2 * m)
        if np.any(self.ub[art] > 0):
            self._iterate(self.phase1_cost, OPT_TOL)
            self._refactor()
            self.x[self.basic] = self.xB
            infeas = float(np.sum(self.x[art]))
            if infeas > FEAS_TOL * max(1.0, float(np.max(np.abs(self.b), initial=0.0))):
                return LpSolution(INFEASIBLE, None, np.nan, iterations=self.iterations)
            self.ub[art] = 0.0
            self.x[art] = 0.0
            nonbasic_art = art[self.status[art] != K.BASIC]
            self.status[nonbasic_art] = FIXED
            self.xB = self.x[self.basic]
        status, y, d = self._iterate(self.c, OPT_TOL * self.cost_scale)
        if status == UNBOUNDED:
            return LpSolution(UNBOUNDED, None, -np.inf, iterations=self.iterations)
        self._refactor()
        self.x[self.basic] = self.xB
        y = self.basis.btran(self.c[self.basic])
        d = self.c - self.At @ y
        x = self.x[:n].copy()
        return LpSolution(OPTIMAL, x, float(self.c[:n] @ x), y, d[:n], self.iterations)


def simplex_solve(model: MilpModel, lb=None, ub=None) -> LpSolution:
    """Solve the continuous relaxation of ``model`` (binaries as [0, 1] bounds)."""
    sol = _Simplex(model, lb, ub).solve()
    if sol.status == OPTIMAL:
        sol.objective += model.obj_offset
    return sol


def highs_lp_solve(model: MilpModel, lb=None, ub=None) -> LpSolution:
    """Same contract as :func:`simplex_solve`, delegated to HiGHS through scipy."""
    from scipy.optimize import linprog

    lb = model.lb if lb is None else lb
    ub = model.ub if ub is None else ub
    A = model.A
    le = model.sense == LE
    ge = model.sense == GE
    eq = model.sense == EQ
    ineq = le | ge
    sign = np.where(ge, -1.0, 1.0)
    A_ub = sp.diags(sign[ineq]) @ A[ineq] if ineq.any() else None
    b_ub = (sign * model.rhs)[ineq] if ineq.any() else None
    res = linprog(
        model.c, A_ub=A_ub, b_ub=b_ub,
        A_eq=A[eq] if eq.any() else None, b_eq=model.rhs[eq] if eq.any() else None,
        bounds=np.column_stack([lb, ub]), method="highs",
    )
    if res.status == 2:
        return LpSolution(INFEASIBLE, None, np.nan)
    if res.status == 3:
        return LpSolution(UNBOUNDED, None, -np.inf)
    if res.status != 0:
        raise NumericalFailure(f"HiGHS LP failed: {res.message}")
    y = np.zeros(model.n_rows)
    if ineq.any():
        y[ineq] = sign[ineq] * res.ineqlin.marginals
    if eq.any():
        y[eq] = res.eqlin.marginals
    d = model.c - model.A.T @ y
    return LpSolution(OPTIMAL, res.x, float(res.fun) + model.obj_offset, y, d, int(res.nit))


LP_ENGINES = {"simplex": simplex_solve, "highs": highs_lp_solve}


def lp_relax_solve(model: MilpModel, engine: str = "simplex") -> LpSolution:
    """LP relaxation of ``model``: binaries relaxed to their [0, 1] bounds."""
    return LP_ENGINES[engine](model)


def dual_objective(model: MilpModel, sol: LpSolution) -> float:
    """Lagrangian dual value b.y + sum of bound terms for the row duals in ``sol``."""
    d = model.c - model.A.T @ sol.duals
    tol = OPT_TOL * max(1.0, float(np.max(np.abs(model.c), initial=0.0)))
    d = np.where(np.abs(d) <= tol, 0.0, d)
    with np.errstate(invalid="ignore"):
        bound_terms = np.where(d > 0, d * model.lb, np.where(d < 0, d * model.ub, 0.0))
    return float(model.rhs @ sol.duals + bound_terms.sum()) + model.obj_offset
