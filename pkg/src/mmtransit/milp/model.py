"""Solver-independent linear model container and result type."""
from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

CONTINUOUS, INTEGER, BINARY = "C", "I", "B"

FEAS_TOL = 1e-6
INT_TOL = 1e-5
REL_GAP = 1e-6
GAP_EPS = 1e-9

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.]*$")


class ModelError(ValueError):
    """Structural problem with a model (bad bounds, unknown variable, ...)."""


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    FEASIBLE = "feasible"  # incumbent found, gap above tolerance
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    TIME_LIMIT = "time-limit"  # no incumbent when time ran out


class MilpModel:
    """A minimisation model ``min c.x  s.t.  lo <= A x <= hi,  lb <= x <= ub``.

    Variables and constraints are appended one at a time and addressed by
    integer index; every variable and constraint also carries a name used by
    the text formats. Constraints are stored as sparse rows.
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self.var_names: List[str] = []
        self.lb: List[float] = []
        self.ub: List[float] = []
        self.vtype: List[str] = []
        self.obj: List[float] = []
        self.obj_offset = 0.0
        self.con_names: List[str] = []
        self.rows: List[Tuple[np.ndarray, np.ndarray]] = []
        self.row_lo: List[float] = []
        self.row_hi: List[float] = []
        self._var_index: Dict[str, int] = {}

    # construction -------------------------------------------------------
    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_cons(self) -> int:
        return len(self.con_names)

    def add_var(self, name: str, lb: float = 0.0, ub: float = math.inf,
                vtype: str = CONTINUOUS, obj: float = 0.0) -> int:
        if name in self._var_index:
            raise ModelError(f"duplicate variable name {name!r}")
        if vtype not in (CONTINUOUS, INTEGER, BINARY):
            raise ModelError(f"unknown variable type {vtype!r}")
        if vtype == BINARY:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        if not lb <= ub:
            raise ModelError(f"variable {name}: lower bound {lb} exceeds upper bound {ub}")
        if not math.isfinite(obj):
            raise ModelError(f"variable {name}: non-finite objective coefficient")
        idx = len(self.var_names)
        self._var_index[name] = idx
        self.var_names.append(name)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.vtype.append(vtype)
        self.obj.append(float(obj))
        return idx

    def var(self, name: str) -> int:
        return self._var_index[name]

    def has_var(self, name: str) -> bool:
        return name in self._var_index

    def add_obj(self, idx: int, coeff: float) -> None:
        self.obj[idx] += coeff

    def add_constr(self, coeffs: Mapping[int, float] | Iterable[Tuple[int, float]],
                   sense: str, rhs: float, name: Optional[str] = None) -> int:
        """Append ``sum(coeffs) sense rhs`` with sense one of ``<=``, ``>=``, ``=``.

        Repeated indices are summed.
        """
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        acc: Dict[int, float] = {}
        for j, a in items:
            if not 0 <= j < self.n_vars:
                raise ModelError(f"constraint references unknown variable {j}")
            if not math.isfinite(a):
                raise ModelError("non-finite constraint coefficient")
            acc[j] = acc.get(j, 0.0) + float(a)
        idx = np.array(sorted(acc), dtype=np.int64)
        val = np.array([acc[j] for j in idx], dtype=float)
        if sense in ("<=", "<", "L"):
            lo, hi = -math.inf, float(rhs)
        elif sense in (">=", ">", "G"):
            lo, hi = float(rhs), math.inf
        elif sense in ("=", "==", "E"):
            lo = hi = float(rhs)
        else:
            raise ModelError(f"unknown constraint sense {sense!r}")
        name = name or f"c{self.n_cons}"
        self.con_names.append(name)
        self.rows.append((idx, val))
        self.row_lo.append(lo)
        self.row_hi.append(hi)
        return len(self.con_names) - 1

    def add_range(self, coeffs, lo: float, hi: float, name: Optional[str] = None) -> int:
        k = self.add_constr(coeffs, "<=", hi, name)
        self.row_lo[k] = float(lo)
        return k

    def sense(self, k: int) -> str:
        lo, hi = self.row_lo[k], self.row_hi[k]
        if lo == hi:
            return "="
        if math.isinf(lo):
            return "<="
        if math.isinf(hi):
            return ">="
        return "range"

    # array views --------------------------------------------------------
    def matrix(self) -> sp.csr_matrix:
        indptr = [0]
        indices, data = [], []
        for idx, val in self.rows:
            indices.append(idx)
            data.append(val)
            indptr.append(indptr[-1] + len(idx))
        if indices:
            ind = np.concatenate(indices)
            dat = np.concatenate(data)
        else:
            ind, dat = np.zeros(0, dtype=np.int64), np.zeros(0)
        return sp.csr_matrix((dat, ind, np.array(indptr)), shape=(self.n_cons, self.n_vars))

    def arrays(self):
        """Return ``(c, A, row_lo, row_hi, lb, ub, is_int)`` as numpy objects."""
        return (np.array(self.obj, dtype=float), self.matrix(),
                np.array(self.row_lo, dtype=float), np.array(self.row_hi, dtype=float),
                np.array(self.lb, dtype=float), np.array(self.ub, dtype=float),
                np.array([t != CONTINUOUS for t in self.vtype], dtype=bool))

    @property
    def n_integer(self) -> int:
        return sum(t != CONTINUOUS for t in self.vtype)

    def validate(self) -> None:
        """Raise ModelError for names the text formats cannot carry."""
        seen = set()
        for n in self.con_names:
            if n in seen:
                raise ModelError(f"duplicate constraint name {n!r}")
            seen.add(n)
        for n in list(self.var_names) + list(self.con_names):
            if not _NAME_RE.match(n):
                raise ModelError(f"name {n!r} must match [A-Za-z_][A-Za-z0-9_.]*")

    def copy(self) -> "MilpModel":
        m = MilpModel(self.name)
        m.var_names = list(self.var_names)
        m.lb, m.ub = list(self.lb), list(self.ub)
        m.vtype, m.obj = list(self.vtype), list(self.obj)
        m.obj_offset = self.obj_offset
        m.con_names = list(self.con_names)
        m.rows = list(self.rows)
        m.row_lo, m.row_hi = list(self.row_lo), list(self.row_hi)
        m._var_index = dict(self._var_index)
        return m

    def objective_value(self, x: np.ndarray) -> float:
        return float(np.dot(self.obj, x)) + self.obj_offset


@dataclass
class MilpSolution:
    status: Status
    objective: float = math.nan
    bound: float = math.nan
    gap: float = math.nan
    x: Optional[np.ndarray] = None
    var_names: Sequence[str] = field(default_factory=list)
    nodes: int = 0
    root_bound: float = math.nan
    message: str = ""

    @property
    def has_solution(self) -> bool:
        return self.x is not None

    def value(self, name: str) -> float:
        return float(self.x[list(self.var_names).index(name)])

    def values(self) -> Dict[str, float]:
        return {n: float(v) for n, v in zip(self.var_names, self.x)}


def relative_gap(objective: float, bound: float) -> float:
    """``(objective - bound) / max(|objective|, eps)``, clipped below at 0."""
    if not (math.isfinite(objective) and math.isfinite(bound)):
        return math.inf
    return max(0.0, (objective - bound) / max(abs(objective), GAP_EPS))


def check_solution(model: MilpModel, x: np.ndarray, feas_tol: float = FEAS_TOL,
                   int_tol: float = INT_TOL) -> List[str]:
    """List every bound, row or integrality violation of ``x``."""
    out = []
    c, A, lo, hi, lb, ub, is_int = model.arrays()
    x = np.asarray(x, dtype=float)
    for j in np.flatnonzero((x < lb - feas_tol) | (x > ub + feas_tol)):
        out.append(f"bound {model.var_names[j]}={x[j]:.9g} outside [{lb[j]}, {ub[j]}]")
    for j in np.flatnonzero(is_int & (np.abs(x - np.round(x)) > int_tol)):
        out.append(f"integrality {model.var_names[j]}={x[j]:.9g}")
    ax = A @ x if model.n_cons else np.zeros(0)
    for k in np.flatnonzero((ax < lo - feas_tol) | (ax > hi + feas_tol)):
        out.append(f"row {model.con_names[k]}: {ax[k]:.9g} not in [{lo[k]}, {hi[k]}]")
    return out
