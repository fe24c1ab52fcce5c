"""Map between semantic variable identities and MILP column numbers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import IndexMismatch

FIRST_STAGE_KINDS = (
    "x", "pwl", "x_curt", "u_curt", "d_curt", "ch", "dis", "g_ch", "g_dis", "soc", "delta", "flow",
)
SECOND_STAGE_KINDS = (
    "reg_up", "reg_down", "x_curt_s", "u_curt_s", "d_curt_s",
    "ch_s", "dis_s", "g_ch_s", "g_dis_s", "soc_s", "delta_s", "flow_s",
)


@dataclass(frozen=True)
class Block:
    ids: np.ndarray       # column ids, shaped like the axes
    axes: tuple           # axis names, e.g. ("gen", "t", "scenario")
    labels: tuple         # per-axis label tuples (entity ids, or range for t/scenario/segment)

    def position(self, key) -> tuple:
        if len(key) != len(self.axes):
            raise IndexMismatch(f"expected {len(self.axes)} keys {self.axes}, got {key!r}")
        pos = []
        for axis, labels, k in zip(self.axes, self.labels, key):
            try:
                pos.append(labels.index(k))
            except ValueError:
                raise IndexMismatch(f"unknown {axis} {k!r}") from None
        return tuple(pos)


class VarIndex:
    """Kind -> block of columns, plus the reverse lookup column -> (kind, key)."""

    def __init__(self):
        self.blocks = {}
        self._reverse = None

    def add(self, kind, ids, axes, labels):
        self.blocks[kind] = Block(np.asarray(ids), tuple(axes), tuple(tuple(l) for l in labels))
        self._reverse = None

    def __contains__(self, kind):
        return kind in self.blocks

    def ids(self, kind) -> np.ndarray:
        try:
            return self.blocks[kind].ids
        except KeyError:
            raise IndexMismatch(f"no variables of kind {kind!r}") from None

    def column(self, kind, *key) -> int:
        block = self.blocks.get(kind)
        if block is None:
            raise IndexMismatch(f"no variables of kind {kind!r}")
        return int(block.ids[block.position(key)])

    @property
    def n_vars(self) -> int:
        return sum(b.ids.size for b in self.blocks.values())

    def identity(self, col: int) -> tuple:
        if self._reverse is None:
            owner = np.full(self.n_vars, -1)
            kinds = list(self.blocks)
            for n, kind in enumerate(kinds):
                ids = self.blocks[kind].ids.ravel()
                if np.any(ids >= owner.size) or np.any(owner[ids] != -1):
                    raise IndexMismatch("variable index is not a bijection")
                owner[ids] = n
            self._reverse = (kinds, owner)
        kinds, owner = self._reverse
        if not 0 <= col < owner.size:
            raise IndexMismatch(f"column {col} out of range")
        block = self.blocks[kinds[owner[col]]]
        pos = np.unravel_index(np.flatnonzero(block.ids.ravel() == col)[0], block.ids.shape)
        return (kinds[owner[col]],) + tuple(l[p] for l, p in zip(block.labels, pos))

    def check_covers(self, n_vars: int) -> None:
        cols = np.concatenate([b.ids.ravel() for b in self.blocks.values()]) if self.blocks else np.zeros(0, int)
        if cols.size != n_vars or not np.array_equal(np.sort(cols), np.arange(n_vars)):
            raise IndexMismatch(f"index covers {cols.size} columns, model has {n_vars}")
