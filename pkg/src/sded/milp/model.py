"""Solver-agnostic sparse MILP: minimize c.x + offset s.t. row senses, bounds, binaries."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..errors import DimensionMismatch

LE, EQ, GE = "L", "E", "G"
SENSES = (LE, EQ, GE)


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MilpModel:
    """Minimization model with constraints stored as sparse triplets.

    ``rows``/``cols``/``vals`` are the coordinate entries of the constraint
    matrix; duplicates are summed when the matrix is materialized.
    """

    c: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    binary: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    sense: np.ndarray
    rhs: np.ndarray
    var_names: tuple = ()
    row_names: tuple = ()
    obj_offset: float = 0.0
    name: str = "model"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        n = len(self.c)
        m = len(self.rhs)
        set_ = lambda k, v: object.__setattr__(self, k, v)
        set_("c", _frozen(self.c, float))
        set_("lb", _frozen(self.lb, float))
        set_("ub", _frozen(self.ub, float))
        set_("binary", _frozen(self.binary, bool))
        set_("rows", _frozen(self.rows, np.int64))
        set_("cols", _frozen(self.cols, np.int64))
        set_("vals", _frozen(self.vals, float))
        set_("sense", _frozen(self.sense, "U1"))
        set_("rhs", _frozen(self.rhs, float))
        set_("obj_offset", float(self.obj_offset))
        if not self.var_names:
            set_("var_names", tuple(f"x{j}" for j in range(n)))
        if not self.row_names:
            set_("row_names", tuple(f"r{i}" for i in range(m)))
        set_("var_names", tuple(self.var_names))
        set_("row_names", tuple(self.row_names))
        self.check()

    def check(self):
        n, m = self.n_vars, self.n_rows
        for attr in ("lb", "ub", "binary"):
            if len(getattr(self, attr)) != n:
                raise DimensionMismatch(f"{attr} has length {len(getattr(self, attr))}, expected {n}")
        if len(self.sense) != m:
            raise DimensionMismatch("sense/rhs length mismatch")
        if not (len(self.rows) == len(self.cols) == len(self.vals)):
            raise DimensionMismatch("triplet arrays differ in length")
        if len(self.var_names) != n or len(self.row_names) != m:
            raise DimensionMismatch("name lists do not match model size")
        if len(self.rows) and (self.rows.min() < 0 or self.rows.max() >= m):
            raise DimensionMismatch("row index out of range")
        if len(self.cols) and (self.cols.min() < 0 or self.cols.max() >= n):
            raise DimensionMismatch("column index out of range")
        if np.any(self.lb > self.ub):
            bad = int(np.flatnonzero(self.lb > self.ub)[0])
            raise ValueError(f"variable {self.var_names[bad]} has lb > ub")
        if np.any(self.lb == np.inf) or np.any(self.ub == -np.inf):
            raise ValueError("lower bounds must be < +inf and upper bounds > -inf")
        if np.any(self.binary & ((self.lb < 0) | (self.ub > 1))):
            raise ValueError("binary variable bounds must lie within [0, 1]")
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.vals)) and np.all(np.isfinite(self.rhs))):
            raise ValueError("model coefficients must be finite")
        if not set(np.unique(self.sense)) <= set(SENSES):
            raise ValueError(f"row senses must be among {SENSES}")

    @property
    def n_vars(self) -> int:
        return len(self.c)

    @property
    def n_rows(self) -> int:
        return len(self.rhs)

    @property
    def n_binaries(self) -> int:
        return int(self.binary.sum())

    @property
    def A(self) -> sp.csr_matrix:
        if "A" not in self._cache:
            A = sp.coo_matrix((self.vals, (self.rows, self.cols)), shape=(self.n_rows, self.n_vars)).tocsr()
            A.sum_duplicates()
            self._cache["A"] = A
        return self._cache["A"]

    def objective(self, x) -> float:
        return float(self.c @ np.asarray(x, float)) + self.obj_offset

    def row_activity(self, x) -> np.ndarray:
        return self.A @ np.asarray(x, float)

    def max_violation(self, x) -> float:
        """Largest bound or row violation at ``x`` (0 when feasible)."""
        x = np.asarray(x, float)
        worst = max(0.0, float(np.max(self.lb - x, initial=0.0)), float(np.max(x - self.ub, initial=0.0)))
        act = self.row_activity(x)
        gap = act - self.rhs
        le = gap[self.sense == LE]
        ge = -gap[self.sense == GE]
        eq = np.abs(gap[self.sense == EQ])
        for part in (le, ge, eq):
            if part.size:
                worst = max(worst, float(part.max()))
        return worst

    def with_bounds(self, lb=None, ub=None, binary=None) -> "MilpModel":
        """Copy sharing the constraint data, with replaced bound/integrality arrays."""
        clone = MilpModel(
            self.c, self.lb if lb is None else lb, self.ub if ub is None else ub,
            self.binary if binary is None else binary,
            self.rows, self.cols, self.vals, self.sense, self.rhs,
            self.var_names, self.row_names, self.obj_offset, self.name,
        )
        if "A" in self._cache:
            clone._cache["A"] = self._cache["A"]
        return clone

    def relaxed(self) -> "MilpModel":
        return self.with_bounds(binary=np.zeros(self.n_vars, bool))

    def drop(self, var_ids=(), row_ids=()) -> "MilpModel":
        """Copy with the given columns and rows removed (indices renumbered)."""
        keep_v = np.ones(self.n_vars, bool)
        keep_v[list(var_ids)] = False
        keep_r = np.ones(self.n_rows, bool)
        keep_r[list(row_ids)] = False
        new_v = np.cumsum(keep_v) - 1
        new_r = np.cumsum(keep_r) - 1
        mask = keep_v[self.cols] & keep_r[self.rows]
        return MilpModel(
            self.c[keep_v], self.lb[keep_v], self.ub[keep_v], self.binary[keep_v],
            new_r[self.rows[mask]], new_v[self.cols[mask]], self.vals[mask],
            self.sense[keep_r], self.rhs[keep_r],
            tuple(n for n, k in zip(self.var_names, keep_v) if k),
            tuple(n for n, k in zip(self.row_names, keep_r) if k),
            self.obj_offset, self.name,
        )

    def same_as(self, other: "MilpModel") -> bool:
        """Exact structural equality (matrix compared after summing duplicates)."""
        if (self.n_vars, self.n_rows) != (other.n_vars, other.n_rows):
            return False
        arrays = ("c", "lb", "ub", "binary", "sense", "rhs")
        if not all(np.array_equal(getattr(self, a), getattr(other, a)) for a in arrays):
            return False
        if self.obj_offset != other.obj_offset:
            return False
        if self.var_names != other.var_names or self.row_names != other.row_names:
            return False
        a, b = self.A.tocoo(), other.A.tocoo()
        ka = np.lexsort((a.col, a.row))
        kb = np.lexsort((b.col, b.row))
        return (
            np.array_equal(a.row[ka], b.row[kb])
            and np.array_equal(a.col[ka], b.col[kb])
            and np.array_equal(a.data[ka], b.data[kb])
        )


class ModelBuilder:
    """Accumulates variables and rows in blocks, then freezes into a MilpModel."""

    def __init__(self, name="model"):
        self.name = name
        self._c, self._lb, self._ub, self._bin, self._vnames = [], [], [], [], []
        self._rows, self._cols, self._vals = [], [], []
        self._sense, self._rhs, self._rnames = [], [], []
        self.n_vars = 0
        self.n_rows = 0
        self.offset = 0.0

    def add_vars(self, kind, shape, lb=0.0, ub=np.inf, cost=0.0, binary=False) -> np.ndarray:
        """Add a block of variables; returns their column ids with the block's shape."""
        shape = tuple(int(s) for s in shape)
        size = int(np.prod(shape)) if shape else 1
        ids = np.arange(self.n_vars, self.n_vars + size).reshape(shape)
        self._c.append(np.broadcast_to(np.asarray(cost, float), shape).ravel())
        self._lb.append(np.broadcast_to(np.asarray(lb, float), shape).ravel())
        self._ub.append(np.broadcast_to(np.asarray(ub, float), shape).ravel())
        self._bin.append(np.full(size, bool(binary)))
        self._vnames.extend(f"{kind}[{','.join(map(str, idx))}]" for idx in np.ndindex(*shape))
        self.n_vars += size
        return ids

    def add_rows(self, kind, terms, sense, rhs, shape=None) -> np.ndarray:
        """Add one row per element of ``shape``.

        ``terms`` is a list of ``(col_ids, coef)`` pairs, each broadcast to the
        row shape; row r receives one entry per term.
        """
        if shape is None:
            shape = np.broadcast_shapes(*(np.shape(cols) for cols, _ in terms))
        shape = tuple(shape)
        size = int(np.prod(shape)) if shape else 1
        row_ids = np.arange(self.n_rows, self.n_rows + size).reshape(shape)
        for cols, coef in terms:
            cols = np.broadcast_to(np.asarray(cols, np.int64), shape).ravel()
            coef = np.broadcast_to(np.asarray(coef, float), shape).ravel()
            keep = coef != 0.0
            self._rows.append(row_ids.ravel()[keep])
            self._cols.append(cols[keep])
            self._vals.append(coef[keep])
        self._sense.append(np.full(size, sense))
        self._rhs.append(np.broadcast_to(np.asarray(rhs, float), shape).ravel())
        self._rnames.extend(f"{kind}[{','.join(map(str, idx))}]" for idx in np.ndindex(*shape))
        self.n_rows += size
        return row_ids

    def add_entries(self, row_ids, col_ids, coef):
        """Append extra coefficients to rows that already exist."""
        row_ids = np.asarray(row_ids, np.int64)
        col_ids = np.broadcast_to(np.asarray(col_ids, np.int64), row_ids.shape).ravel()
        coef = np.broadcast_to(np.asarray(coef, float), row_ids.shape).ravel()
        row_ids = row_ids.ravel()
        keep = coef != 0.0
        self._rows.append(row_ids[keep])
        self._cols.append(col_ids[keep])
        self._vals.append(coef[keep])

    def build(self) -> MilpModel:
        cat = lambda parts, dt: np.concatenate(parts).astype(dt) if parts else np.zeros(0, dt)
        return MilpModel(
            c=cat(self._c, float), lb=cat(self._lb, float), ub=cat(self._ub, float),
            binary=cat(self._bin, bool),
            rows=cat(self._rows, np.int64), cols=cat(self._cols, np.int64), vals=cat(self._vals, float),
            sense=cat(self._sense, "U1"), rhs=cat(self._rhs, float),
            var_names=tuple(self._vnames), row_names=tuple(self._rnames),
            obj_offset=self.offset, name=self.name,
        )
