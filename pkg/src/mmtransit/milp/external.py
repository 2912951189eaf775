"""Run a MILP through an external solver process.

The external command is called as ``CMD MODEL.mps SOLUTION.txt`` and must
write a solution file of the form::

    status <optimal|feasible|infeasible|unbounded|time-limit>
    objective <value>
    bound <value>
    <variable name> <value>
    ...

Variables missing from the file are read as 0. ``python -m
mmtransit.milp.external MODEL.mps SOLUTION.txt`` is a reference
implementation of that contract built on ``scipy.optimize.milp``.
"""
from __future__ import annotations

import math
import shlex
import subprocess
import sys
import tempfile
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .io import read_mps, write_mps
from .model import MilpModel, MilpSolution, Status, relative_gap


def write_solution(path, status: str, objective: float, bound: float,
                   names: Sequence[str], x: Optional[np.ndarray]) -> None:
    lines = [f"status {status}", f"objective {objective!r}", f"bound {bound!r}"]
    if x is not None:
        lines += [f"{n} {float(v)!r}" for n, v in zip(names, x)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_solution(path, model: MilpModel) -> MilpSolution:
    status, obj, bound = None, math.nan, math.nan
    x = np.zeros(model.n_vars)
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if len(parts) != 2:
            continue
        key, val = parts
        if key == "status":
            status = Status(val)
        elif key == "objective":
            obj = float(val)
        elif key == "bound":
            bound = float(val)
        elif model.has_var(key):
            x[model.var(key)] = float(val)
    if status is None:
        raise RuntimeError(f"solution file {path} has no status line")
    has_x = status in (Status.OPTIMAL, Status.FEASIBLE)
    return MilpSolution(status, obj, bound, relative_gap(obj, bound) if has_x else math.nan,
                        x if has_x else None, list(model.var_names))


def solve_external(model: MilpModel, command: str, time_limit: Optional[float] = None,
                   workdir=None) -> MilpSolution:
    """Export ``model`` as MPS, run ``command`` on it and read the solution back."""
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        mps = Path(tmp) / "model.mps"
        sol = Path(tmp) / "solution.txt"
        mps.write_text(write_mps(model))
        argv = shlex.split(command) + [str(mps), str(sol)]
        proc = subprocess.run(argv, capture_output=True, text=True, timeout=time_limit)
        if proc.returncode != 0 or not sol.exists():
            raise RuntimeError(f"external solver failed ({proc.returncode}): {proc.stderr.strip()}")
        out = read_solution(sol, model)
    if out.x is not None:
        out.objective = model.objective_value(out.x)
        out.gap = relative_gap(out.objective, out.bound)
    return out


def _reference_main(argv=None) -> int:
    from scipy.optimize import Bounds, LinearConstraint, milp

    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 2:
        print("usage: python -m mmtransit.milp.external MODEL.mps SOLUTION.txt", file=sys.stderr)
        return 3
    model = read_mps(Path(argv[0]).read_text())
    c, A, lo, hi, lb, ub, is_int = model.arrays()
    cons = [LinearConstraint(A, lo, hi)] if model.n_cons else []
    res = milp(c, constraints=cons, integrality=is_int.astype(int), bounds=Bounds(lb, ub),
               options={"mip_rel_gap": 1e-9})
    if res.status == 0:
        obj = float(res.fun) + model.obj_offset
        bound = getattr(res, "mip_dual_bound", None)
        bound = obj if bound is None or not math.isfinite(bound) else float(bound) + model.obj_offset
        write_solution(argv[1], "optimal", obj, min(bound, obj), model.var_names, res.x)
    elif res.status == 2:
        write_solution(argv[1], "infeasible", math.nan, math.nan, [], None)
    elif res.status == 3:
        write_solution(argv[1], "unbounded", math.nan, math.nan, [], None)
    else:
        write_solution(argv[1], "time-limit", math.nan, math.nan, [], None)
    return 0


if __name__ == "__main__":
    sys.exit(_reference_main())
