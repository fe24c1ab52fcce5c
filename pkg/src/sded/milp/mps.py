"""Fixed-format MPS writer and reader.

Layout written by :func:`write_mps` (1-based columns)::

    field 1  cols  2-3   bound / row type
    field 2  cols  5-12  row name, column name or set name
    field 3  cols 15-22  row or column name
    field 4  cols 25-    numeric value

Each data line carries one entry (fields 5-6 are never used). Names longer
than eight characters, or containing blanks, cannot live in fixed columns, so
when any name needs it every column becomes ``C0000001``... and every row
``R0000001``...; the original names are written to ``<file>.names`` as
``<C|R> <short> <original>`` lines. Numbers use the shortest text that
round-trips a double, which can run past column 36; because names never
contain blanks the file also parses as free-format MPS. The objective
constant is stored as the negated RHS of the objective row. Binaries are
enclosed in ``'MARKER' 'INTORG'``/``'INTEND'`` pairs and get explicit
``BV``/``FX``/``LO``/``UP`` bounds.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import IoError, ParseError
from .model import MilpModel

OBJ = "OBJ"
SET = "BND"
RHS_SET = "RHS"


def _num(v: float) -> str:
    return repr(float(v))


def _needs_mangling(names) -> bool:
    return any(len(n) > 8 or not n or any(ch.isspace() for ch in n) or n == OBJ for n in names)


def mangled_names(model: MilpModel):
    """Names used in the MPS file, and whether they differ from the model's."""
    if _needs_mangling(model.var_names) or _needs_mangling(model.row_names):
        cols = [f"C{j + 1:07d}" for j in range(model.n_vars)]
        rows = [f"R{i + 1:07d}" for i in range(model.n_rows)]
        return cols, rows, True
    return list(model.var_names), list(model.row_names), False


def _line(f1="", f2="", f3="", f4=""):
    text = f" {f1:<2} {f2:<8}  {f3:<8}  {f4}" if f4 != "" else f" {f1:<2} {f2:<8}  {f3}"
    return text.rstrip()


def write_mps(model: MilpModel, path) -> Path:
    path = Path(path)
    cols, rows, mangled = mangled_names(model)
    A = model.A.tocsc()
    out = [f"NAME          {model.name.replace(' ', '_') or 'model'}", "ROWS", _line("N", OBJ)]
    out += [_line(s, r) for s, r in zip(model.sense, rows)]
    out.append("COLUMNS")
    in_int = False
    marker = 0
    for j in range(model.n_vars):
        if model.binary[j] != in_int:
            tag = "'INTORG'" if model.binary[j] else "'INTEND'"
            out.append(_line("", f"M{marker:07d}", "'MARKER'", tag))
            marker += 1
            in_int = bool(model.binary[j])
        name = cols[j]
        start, stop = A.indptr[j], A.indptr[j + 1]
        if model.c[j] != 0.0 or start == stop:
            out.append(_line("", name, OBJ, _num(model.c[j])))
        for k in range(start, stop):
            out.append(_line("", name, rows[A.indices[k]], _num(A.data[k])))
    if in_int:
        out.append(_line("", f"M{marker:07d}", "'MARKER'", "'INTEND'"))
    out.append("RHS")
    if model.obj_offset != 0.0:
        out.append(_line("", RHS_SET, OBJ, _num(-model.obj_offset)))
    for i in np.flatnonzero(model.rhs != 0.0):
        out.append(_line("", RHS_SET, rows[i], _num(model.rhs[i])))
    out.append("BOUNDS")
    for j in range(model.n_vars):
        lo, hi, name = model.lb[j], model.ub[j], cols[j]
        if model.binary[j]:
            if lo == 0.0 and hi == 1.0:
                out.append(_line("BV", SET, name))
            elif lo == hi:
                out.append(_line("FX", SET, name, _num(lo)))
            else:
                out.append(_line("LO", SET, name, _num(lo)))
                out.append(_line("UP", SET, name, _num(hi)))
            continue
        if lo == hi:
            out.append(_line("FX", SET, name, _num(lo)))
        elif lo == -np.inf and hi == np.inf:
            out.append(_line("FR", SET, name))
        else:
            if lo == -np.inf:
                out.append(_line("MI", SET, name))
            elif lo != 0.0:
                out.append(_line("LO", SET, name, _num(lo)))
            if hi != np.inf:
                out.append(_line("UP", SET, name, _num(hi)))
    out.append("ENDATA")
    try:
        path.write_text("\n".join(out) + "\n")
        table = names_table_path(path)
        if mangled:
            lines = [f"C {s} {o}" for s, o in zip(cols, model.var_names)]
            lines += [f"R {s} {o}" for s, o in zip(rows, model.row_names)]
            table.write_text("\n".join(lines) + "\n")
        elif table.exists():
            table.unlink()
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None
    return path


def names_table_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".names")


def read_mps(path, restore_names: bool = True) -> MilpModel:
    """Parse an MPS file produced by :func:`write_mps` (or any free-format MPS
    without RANGES); the sibling ``.names`` table is applied when present."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from None

    name = "model"
    section = None
    obj_row = None
    row_index, row_names, senses = {}, [], []
    col_index, col_names = {}, []
    c, is_int = [], []
    trip_r, trip_c, trip_v = [], [], []
    rhs = {}
    offset = 0.0
    bounds = {}
    integer = False

    def column(nm):
        if nm not in col_index:
            col_index[nm] = len(col_names)
            col_names.append(nm)
            c.append(0.0)
            is_int.append(integer)
        return col_index[nm]

    for lineno, raw in enumerate(lines, 1):
        if not raw.strip() or raw.startswith("*"):
            continue
        tokens = raw.split()
        if not raw[0].isspace():
            section = tokens[0].upper()
            if section == "NAME":
                name = tokens[1] if len(tokens) > 1 else "model"
            elif section == "ENDATA":
                break
            elif section not in ("ROWS", "COLUMNS", "RHS", "BOUNDS"):
                raise ParseError(f"{path}:{lineno}: unsupported section {section}")
            continue
        try:
            if section == "ROWS":
                kind, rname = tokens[0].upper(), tokens[1]
                if kind == "N":
                    if obj_row is None:
                        obj_row = rname
                    continue
                if kind not in ("L", "G", "E"):
                    raise ParseError(f"{path}:{lineno}: bad row type {kind}")
                row_index[rname] = len(row_names)
                row_names.append(rname)
                senses.append(kind)
            elif section == "COLUMNS":
                if len(tokens) >= 3 and tokens[1] == "'MARKER'":
                    integer = tokens[2] == "'INTORG'"
                    continue
                j = column(tokens[0])
                for rname, val in zip(tokens[1::2], tokens[2::2]):
                    if rname == obj_row:
                        c[j] += float(val)
                    else:
                        trip_r.append(row_index[rname])
                        trip_c.append(j)
                        trip_v.append(float(val))
            elif section == "RHS":
                pairs = tokens[1:] if len(tokens) % 2 == 1 else tokens
                for rname, val in zip(pairs[::2], pairs[1::2]):
                    if rname == obj_row:
                        offset = -float(val)
                    else:
                        rhs[row_index[rname]] = float(val)
            elif section == "BOUNDS":
                kind, cname = tokens[0].upper(), tokens[2]
                value = float(tokens[3]) if len(tokens) > 3 else None
                bounds.setdefault(cname, []).append((kind, value))
        except (KeyError, IndexError, ValueError) as exc:
            raise ParseError(f"{path}:{lineno}: cannot parse {raw.strip()!r} ({exc})") from None

    n = len(col_names)
    lb = np.zeros(n)
    ub = np.full(n, np.inf)
    binary = np.array(is_int, dtype=bool)
    ub[binary] = 1.0
    for cname, items in bounds.items():
        if cname not in col_index:
            raise ParseError(f"{path}: bound on unknown column {cname}")
        j = col_index[cname]
        for kind, value in items:
            if kind == "UP":
                ub[j] = value
            elif kind == "LO":
                lb[j] = value
            elif kind == "FX":
                lb[j] = ub[j] = value
            elif kind == "FR":
                lb[j], ub[j] = -np.inf, np.inf
            elif kind == "MI":
                lb[j] = -np.inf
            elif kind == "PL":
                ub[j] = np.inf
            elif kind == "BV":
                lb[j], ub[j] = 0.0, 1.0
                binary[j] = True
            else:
                raise ParseError(f"{path}: unsupported bound type {kind}")
    b = np.zeros(len(row_names))
    for i, v in rhs.items():
        b[i] = v

    var_names, rnames = col_names, row_names
    table = names_table_path(path)
    if restore_names and table.exists():
        mapping = {"C": {}, "R": {}}
        for entry in table.read_text().splitlines():
            if entry.strip():
                kind, short, original = entry.split(" ", 2)
                mapping[kind][short] = original
        var_names = [mapping["C"].get(nm, nm) for nm in col_names]
        rnames = [mapping["R"].get(nm, nm) for nm in row_names]
    return MilpModel(
        c=np.array(c), lb=lb, ub=ub, binary=binary,
        rows=np.array(trip_r, np.int64), cols=np.array(trip_c, np.int64), vals=np.array(trip_v),
        sense=np.array(senses, dtype="U1"), rhs=b,
        var_names=tuple(var_names), row_names=tuple(rnames), obj_offset=offset, name=name,
    )
