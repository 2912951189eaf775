"""CPLEX-LP and free-MPS writers and readers for :class:`MilpModel`.

Both formats are written so that reading them back reproduces the model
exactly: numbers are printed with 17 significant digits, variables appear
in index order, constraints in row order.

MPS layout (free format, one record per line)::

    NAME <model>
    ROWS
     N  obj
     L|G|E  <row>              # row order of the model
    COLUMNS
        MARKER 'MARKER' 'INTORG'  # around each run of integer columns
     <col> <row> <value>       # objective entry first, then rows by index
    RHS
     RHS <row> <value>         # objective row holds minus the constant term
    RANGES
     RNG <row> <hi - lo>       # two-sided rows are written as L rows
    BOUNDS
     FR|MI|PL|LO|UP|FX|BV BND <col> [<value>]
    ENDATA

LP layout::

    \\ <model>
    Minimize
     obj: <terms> [+ constant]
    Subject To
     <row>: <terms> <=|>=|= <rhs>
     <row>: <lo> <= <terms> <= <hi>    # two-sided rows
    Bounds
     <lo> <= <col> <= <hi> | <col> free | <col> = <v> | ...
    Generals
     <integer cols>
    Binaries
     <binary cols>
    End
"""
from __future__ import annotations

import math
import re
from typing import Dict, List

from .model import BINARY, CONTINUOUS, INTEGER, MilpModel, ModelError


def _num(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    r = format(float(v), ".17g")
    return "0" if r == "-0" else r


def _columns(model: MilpModel):
    cols: List[List[tuple]] = [[] for _ in range(model.n_vars)]
    for k, (idx, val) in enumerate(model.rows):
        for j, a in zip(idx, val):
            cols[j].append((k, a))
    return cols


# ---------------------------------------------------------------------- MPS
def write_mps(model: MilpModel) -> str:
    model.validate()
    out = [f"NAME {model.name}", "ROWS", " N  obj"]
    for k, name in enumerate(model.con_names):
        s = model.sense(k)
        out.append(f" {'E' if s == '=' else 'G' if s == '>=' else 'L'}  {name}")
    out.append("COLUMNS")
    cols = _columns(model)
    in_int = False
    marker = 0
    for j, name in enumerate(model.var_names):
        is_int = model.vtype[j] != CONTINUOUS
        if is_int != in_int:
            out.append(f"    M{marker} 'MARKER' '{'INTORG' if is_int else 'INTEND'}'")
            marker += 1
            in_int = is_int
        entries = []
        if model.obj[j] != 0:
            entries.append(("obj", model.obj[j]))
        entries += [(model.con_names[k], a) for k, a in cols[j]]
        if not entries:
            # keep the column declared even without coefficients
            entries = [("obj", 0.0)]
        for row, a in entries:
            out.append(f" {name} {row} {_num(a)}")
    if in_int:
        out.append(f"    M{marker} 'MARKER' 'INTEND'")
    out.append("RHS")
    if model.obj_offset != 0:
        out.append(f" RHS obj {_num(-model.obj_offset)}")
    for k, name in enumerate(model.con_names):
        s = model.sense(k)
        rhs = model.row_lo[k] if s == ">=" else model.row_hi[k]
        if rhs != 0:
            out.append(f" RHS {name} {_num(rhs)}")
    ranges = [k for k in range(model.n_cons) if model.sense(k) == "range"]
    if ranges:
        out.append("RANGES")
        for k in ranges:
            out.append(f" RNG {model.con_names[k]} {_num(model.row_hi[k] - model.row_lo[k])}")
    out.append("BOUNDS")
    for j, name in enumerate(model.var_names):
        lb, ub, t = model.lb[j], model.ub[j], model.vtype[j]
        if t == BINARY:
            out.append(f" BV BND {name}")
            continue
        if lb == ub:
            out.append(f" FX BND {name} {_num(lb)}")
            continue
        if math.isinf(lb) and math.isinf(ub):
            out.append(f" FR BND {name}")
            continue
        if math.isinf(lb):
            out.append(f" MI BND {name}")
        elif lb != 0 or t == INTEGER:
            out.append(f" LO BND {name} {_num(lb)}")
        if math.isinf(ub):
            if t == INTEGER:
                out.append(f" PL BND {name}")
        else:
            out.append(f" UP BND {name} {_num(ub)}")
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def read_mps(text: str) -> MilpModel:
    section = None
    name = "model"
    obj_row = None
    row_sense: Dict[str, str] = {}
    row_order: List[str] = []
    col_order: List[str] = []
    col_type: Dict[str, str] = {}
    col_obj: Dict[str, float] = {}
    col_entries: Dict[str, List[tuple]] = {}
    rhs: Dict[str, float] = {}
    rng: Dict[str, float] = {}
    bounds: Dict[str, List[tuple]] = {}
    integer = False
    offset = 0.0
    for raw in text.splitlines():
        line = raw.split("*", 1)[0] if raw.lstrip().startswith("*") else raw
        if not line.strip():
            continue
        if not line[0].isspace():
            head = line.split()
            section = head[0].upper()
            if section == "NAME":
                name = head[1] if len(head) > 1 else "model"
            if section == "ENDATA":
                break
            continue
        f = line.split()
        if section == "ROWS":
            s, r = f[0].upper(), f[1]
            if s == "N":
                if obj_row is None:
                    obj_row = r
                continue
            row_sense[r] = s
            row_order.append(r)
        elif section == "COLUMNS":
            if len(f) >= 3 and f[1].strip("'\"").upper() == "MARKER":
                tag = f[2].strip("'\"").upper()
                integer = tag == "INTORG"
                continue
            c = f[0]
            if c not in col_entries:
                col_order.append(c)
                col_entries[c] = []
                col_type[c] = INTEGER if integer else CONTINUOUS
            for r, v in zip(f[1::2], f[2::2]):
                if r == obj_row:
                    col_obj[c] = col_obj.get(c, 0.0) + float(v)
                elif r in row_sense:
                    col_entries[c].append((r, float(v)))
                else:
                    raise ModelError(f"MPS column {c} references unknown row {r}")
        elif section == "RHS":
            items = f[1:] if len(f) % 2 == 1 else f
            for r, v in zip(items[0::2], items[1::2]):
                if r == obj_row:
                    offset = -float(v)
                else:
                    rhs[r] = float(v)
        elif section == "RANGES":
            items = f[1:] if len(f) % 2 == 1 else f
            for r, v in zip(items[0::2], items[1::2]):
                rng[r] = float(v)
        elif section == "BOUNDS":
            kind = f[0].upper()
            valueless = kind in ("FR", "MI", "PL", "BV")
            if len(f) == 4 or (len(f) == 3 and valueless):
                col = f[2]
            else:
                col = f[1]
            val = None if valueless or len(f) == 2 else float(f[-1])
            bounds.setdefault(col, []).append((kind, val))
        else:
            raise ModelError(f"unexpected MPS data in section {section}: {raw!r}")
    m = MilpModel(name)
    for c in col_order:
        lb, ub, t = 0.0, math.inf, col_type[c]
        for kind, val in bounds.get(c, []):
            if kind == "UP":
                ub = val
                if val < 0 and lb == 0:
                    lb = -math.inf
            elif kind == "LO":
                lb = val
            elif kind == "FX":
                lb = ub = val
            elif kind == "FR":
                lb, ub = -math.inf, math.inf
            elif kind == "MI":
                lb = -math.inf
            elif kind == "PL":
                ub = math.inf
            elif kind == "BV":
                lb, ub, t = 0.0, 1.0, BINARY
            elif kind == "LI":
                lb, t = val, INTEGER
            elif kind == "UI":
                ub, t = val, INTEGER
            else:
                raise ModelError(f"unknown MPS bound type {kind}")
        m.add_var(c, lb, ub, t, col_obj.get(c, 0.0))
    m.obj_offset = offset
    per_row: Dict[str, List[tuple]] = {r: [] for r in row_order}
    for c in col_order:
        j = m.var(c)
        for r, v in col_entries[c]:
            per_row[r].append((j, v))
    for r in row_order:
        s, b = row_sense[r], rhs.get(r, 0.0)
        k = m.add_constr(per_row[r], {"L": "<=", "G": ">=", "E": "="}[s], b, r)
        if r in rng:
            R = rng[r]
            if s == "L":
                m.row_lo[k] = b - abs(R)
            elif s == "G":
                m.row_hi[k] = b + abs(R)
            elif R >= 0:
                m.row_hi[k] = b + R
            else:
                m.row_lo[k] = b + R
    return m


# ----------------------------------------------------------------------- LP
def _terms(pairs, names) -> str:
    parts = []
    for j, a in pairs:
        sign = "-" if a < 0 else "+"
        mag = abs(a)
        coef = "" if mag == 1 and a != 0 else _num(mag) + " "
        parts.append(f"{sign} {coef}{names[j]}")
    if not parts:
        return "0 " + names[0] if names else "0"
    s = " ".join(parts)
    return s[2:] if s.startswith("+ ") else s


def write_lp(model: MilpModel) -> str:
    model.validate()
    names = model.var_names
    out = [f"\\ {model.name}", "Minimize"]
    # every column is listed, zeros included, so a reader sees them in index order
    obj_pairs = list(enumerate(model.obj))
    line = " obj: " + _terms(obj_pairs, names)
    if model.obj_offset:
        line += (" + " if model.obj_offset > 0 else " - ") + _num(abs(model.obj_offset))
    out.append(line)
    out.append("Subject To")
    for k, (idx, val) in enumerate(model.rows):
        expr = _terms(list(zip(idx.tolist(), val.tolist())), names)
        s = model.sense(k)
        nm = model.con_names[k]
        if s == "range":
            out.append(f" {nm}: {_num(model.row_lo[k])} <= {expr} <= {_num(model.row_hi[k])}")
        elif s == ">=":
            out.append(f" {nm}: {expr} >= {_num(model.row_lo[k])}")
        else:
            out.append(f" {nm}: {expr} {'=' if s == '=' else '<='} {_num(model.row_hi[k])}")
    out.append("Bounds")
    for j, nm in enumerate(names):
        lb, ub, t = model.lb[j], model.ub[j], model.vtype[j]
        if t == BINARY:
            continue
        if lb == ub:
            out.append(f" {nm} = {_num(lb)}")
        elif math.isinf(lb) and math.isinf(ub):
            out.append(f" {nm} free")
        elif lb == 0 and math.isinf(ub):
            continue
        else:
            out.append(f" {_num(lb)} <= {nm} <= {_num(ub)}")
    gens = [n for n, t in zip(names, model.vtype) if t == INTEGER]
    bins = [n for n, t in zip(names, model.vtype) if t == BINARY]
    if gens:
        out.append("Generals")
        out += [f" {n}" for n in gens]
    if bins:
        out.append("Binaries")
        out += [f" {n}" for n in bins]
    out.append("End")
    return "\n".join(out) + "\n"


_TOKEN = re.compile(r"\s*(<=|>=|=<|=>|=|<|>|[+-]|:|[A-Za-z_][A-Za-z0-9_.]*|"
                    r"[0-9.]+(?:[eE][+-]?[0-9]+)?|-?inf(?:inity)?)", re.I)

_SECTIONS = {
    "minimize": "obj", "minimise": "obj", "minimum": "obj", "min": "obj",
    "subject to": "st", "such that": "st", "st": "st", "s.t.": "st",
    "bounds": "bounds", "bound": "bounds", "generals": "gen", "general": "gen",
    "gen": "gen", "integers": "gen", "binaries": "bin", "binary": "bin",
    "bin": "bin", "end": "end",
}


def _tokenize(s: str) -> List[str]:
    toks, pos = [], 0
    s = s.strip()
    while pos < len(s):
        m = _TOKEN.match(s, pos)
        if not m:
            raise ModelError(f"cannot parse LP text near {s[pos:pos + 20]!r}")
        toks.append(m.group(1))
        pos = m.end()
    return toks


def _is_number(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return tok.lower() in ("inf", "infinity", "-inf", "-infinity")


def _linear(toks: List[str]):
    """Parse ``[+-] [coef] name ...`` into (terms, constant)."""
    terms, const, i, sign = [], 0.0, 0, 1.0
    coef = None
    while i < len(toks):
        t = toks[i]
        if t in "+-":
            sign = -sign if t == "-" else sign
        elif _is_number(t):
            if coef is not None:
                raise ModelError("two numbers in a row in LP expression")
            coef = float(t)
        else:
            terms.append((t, sign * (1.0 if coef is None else coef)))
            sign, coef = 1.0, None
        i += 1
    if coef is not None:
        const += sign * coef
    return terms, const


def read_lp(text: str) -> MilpModel:
    lines = []
    for raw in text.splitlines():
        raw = raw.split("\\", 1)[0]
        if raw.strip():
            lines.append(raw)
    name_line = text.splitlines()[0] if text.strip().startswith("\\") else ""
    model_name = name_line.lstrip("\\ ").strip() or "model"
    blocks: Dict[str, List[str]] = {"obj": [], "st": [], "bounds": [], "gen": [], "bin": []}
    section = None
    for ln in lines:
        key = ln.strip().lower()
        if key in _SECTIONS:
            section = _SECTIONS[key]
            if section == "end":
                break
            continue
        if section is None:
            raise ModelError(f"LP text outside any section: {ln!r}")
        blocks[section].append(ln)

    # statements may wrap over lines: a new one starts with "name:"
    def statements(block):
        out = []
        for ln in block:
            if re.match(r"^\s*[A-Za-z_][A-Za-z0-9_.]*\s*:", ln) or not out:
                out.append(ln.strip())
            else:
                out[-1] += " " + ln.strip()
        return out

    var_order: List[str] = []
    seen = set()

    def note(n):
        if n not in seen:
            seen.add(n)
            var_order.append(n)

    obj_toks = _tokenize(" ".join(x.strip() for x in blocks["obj"]))
    if len(obj_toks) >= 2 and obj_toks[1] == ":":
        obj_toks = obj_toks[2:]
    obj_terms, offset = _linear(obj_toks)
    for n, _ in obj_terms:
        note(n)
    rows = []
    for st in statements(blocks["st"]):
        toks = _tokenize(st)
        if len(toks) >= 2 and toks[1] == ":":
            rname, toks = toks[0], toks[2:]
        else:
            rname = f"c{len(rows)}"
        ops = [i for i, t in enumerate(toks) if t in ("<=", ">=", "=<", "=>", "=", "<", ">")]
        if len(ops) == 1:
            k = ops[0]
            terms, c = _linear(toks[:k])
            rhs_terms, rc = _linear(toks[k + 1:])
            if rhs_terms:
                raise ModelError(f"variables on the right of row {rname}")
            op = {"=<": "<=", "<": "<=", "=>": ">=", ">": ">="}.get(toks[k], toks[k])
            rows.append((rname, terms, op, rc - c, None))
        elif len(ops) == 2:
            a, b = ops
            lo = float("".join(toks[:a]))
            terms, c = _linear(toks[a + 1:b])
            hi = float("".join(toks[b + 1:]))
            rows.append((rname, terms, "range", lo - c, hi - c))
        else:
            raise ModelError(f"cannot parse constraint {st!r}")
        for n, _ in terms:
            note(n)
    bnds: Dict[str, list] = {}
    for st in blocks["bounds"]:
        toks = _tokenize(st)
        toks = _merge_signs(toks)
        if len(toks) == 2 and toks[1].lower() == "free":
            bnds[toks[0]] = [-math.inf, math.inf]
        elif len(toks) == 5:
            bnds[toks[2]] = [float(toks[0]), float(toks[4])]
        elif len(toks) == 3:
            a, op, b = toks
            if _is_number(a):
                a, b = b, a
                op = {"<=": ">=", ">=": "<=", "=": "="}[op]
            lb, ub = bnds.get(a, [0.0, math.inf])
            if op == "=":
                lb = ub = float(b)
            elif op == "<=":
                ub = float(b)
            else:
                lb = float(b)
            bnds[a] = [lb, ub]
        else:
            raise ModelError(f"cannot parse bound {st!r}")
        note(toks[0] if not _is_number(toks[0]) else toks[2])
    gens = [t for ln in blocks["gen"] for t in ln.split()]
    bins = [t for ln in blocks["bin"] for t in ln.split()]
    for n in gens + bins:
        note(n)
    m = MilpModel(model_name)
    gset, bset = set(gens), set(bins)
    obj_map: Dict[str, float] = {}
    for n, a in obj_terms:
        obj_map[n] = obj_map.get(n, 0.0) + a
    for n in var_order:
        lb, ub = bnds.get(n, [0.0, math.inf])
        t = BINARY if n in bset else INTEGER if n in gset else CONTINUOUS
        m.add_var(n, lb, ub, t, obj_map.get(n, 0.0))
    m.obj_offset = offset
    for rname, terms, op, lo, hi in rows:
        pairs = [(m.var(n), a) for n, a in terms]
        if op == "range":
            m.add_range(pairs, lo, hi, rname)
        else:
            m.add_constr(pairs, op, lo, rname)
    return m


def _merge_signs(toks):
    out, i = [], 0
    while i < len(toks):
        if toks[i] in "+-" and i + 1 < len(toks) and _is_number(toks[i + 1]):
            out.append(("-" if toks[i] == "-" else "") + toks[i + 1])
            i += 2
        else:
            out.append(toks[i])
            i += 1
    return out


def export_model(model: MilpModel, fmt: str = "mps") -> str:
    """Serialise ``model`` as ``"lp"`` or ``"mps"`` text."""
    if fmt == "lp":
        return write_lp(model)
    if fmt == "mps":
        return write_mps(model)
    raise ValueError(f"unknown model format {fmt!r}")


def import_model(text: str, fmt: str = "mps") -> MilpModel:
    if fmt == "lp":
        return read_lp(text)
    if fmt == "mps":
        return read_mps(text)
    raise ValueError(f"unknown model format {fmt!r}")
