"""Best-bound branch and bound over an LP engine.

The LP engine is HiGHS' dual simplex by default (warm-started across nodes
by changing column bounds only); the dense simplex in :mod:`.simplex` can be
swapped in for small models. Node selection is best bound with FIFO order
on ties, branching picks the most fractional integer variable with the
lowest index on ties, and a rounding/diving heuristic runs at the root and
periodically afterwards. Everything is deterministic for identical input
unless the time limit interrupts the search.
"""
from __future__ import annotations

import heapq
import math
import time
from typing import Optional

import numpy as np

from .model import (FEAS_TOL, INT_TOL, REL_GAP, MilpModel, MilpSolution, ModelError,
                    Status, relative_gap)
from .simplex import solve_lp as _dense_solve

HEURISTIC_EVERY = 20
DIVE_DEPTH = 200


class HighsEngine:
    """Warm-started HiGHS LP with mutable column bounds."""

    def __init__(self, c, A, row_lo, row_hi, lb, ub):
        import highspy

        self._hs = highspy
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("presolve", "off")
        h.setOptionValue("threads", 1)
        h.setOptionValue("random_seed", 0)
        h.setOptionValue("primal_feasibility_tolerance", 1e-9)
        h.setOptionValue("dual_feasibility_tolerance", 1e-9)
        inf = h.getInfinity()
        lp = highspy.HighsLp()
        n, m = len(c), A.shape[0]
        lp.num_col_, lp.num_row_ = n, m
        lp.col_cost_ = np.asarray(c, dtype=float)
        lp.col_lower_ = np.where(np.isinf(lb), -inf, lb)
        lp.col_upper_ = np.where(np.isinf(ub), inf, ub)
        lp.row_lower_ = np.where(np.isinf(row_lo), -inf, row_lo)
        lp.row_upper_ = np.where(np.isinf(row_hi), inf, row_hi)
        csc = A.tocsc()
        csc.sort_indices()
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = csc.indptr.astype(np.int32)
        lp.a_matrix_.index_ = csc.indices.astype(np.int32)
        lp.a_matrix_.value_ = csc.data.astype(float)
        lp.a_matrix_.num_col_, lp.a_matrix_.num_row_ = n, m
        h.passModel(lp)
        self.h, self.n, self.inf = h, n, inf
        self._cols = np.arange(n, dtype=np.int32)

    def solve(self, lb, ub):
        h, hs = self.h, self._hs
        lo = np.where(np.isinf(lb), -self.inf, lb)
        hi = np.where(np.isinf(ub), self.inf, ub)
        h.changeColsBounds(self.n, self._cols, lo, hi)
        h.run()
        st = h.getModelStatus()
        known = (hs.HighsModelStatus.kOptimal, hs.HighsModelStatus.kInfeasible,
                 hs.HighsModelStatus.kUnbounded, hs.HighsModelStatus.kModelEmpty)
        if st not in known:
            # a warm start can stall on badly scaled rows; retry cold, then presolved
            h.clearSolver()
            h.run()
            st = h.getModelStatus()
        if st not in known:
            h.setOptionValue("presolve", "on")
            h.clearSolver()
            h.run()
            st = h.getModelStatus()
            h.setOptionValue("presolve", "off")
        if st == hs.HighsModelStatus.kOptimal:
            x = np.array(h.getSolution().col_value, dtype=float)
            return "optimal", float(h.getInfo().objective_function_value), x
        if st == hs.HighsModelStatus.kInfeasible:
            return "infeasible", math.inf, None
        if st in (hs.HighsModelStatus.kUnbounded, hs.HighsModelStatus.kUnboundedOrInfeasible):
            return "unbounded", -math.inf, None
        if st == hs.HighsModelStatus.kModelEmpty:
            x = np.where(np.asarray(self.h.getLp().col_cost_) > 0, lb, ub)
            x = np.where(np.isfinite(x), x, 0.0)
            return "optimal", float(np.dot(self.h.getLp().col_cost_, x)), x
        raise RuntimeError(f"LP engine stopped with status {h.modelStatusToString(st)}")


class DenseSimplexEngine:
    """Adapter exposing :func:`simplex.solve_lp` through the engine interface."""

    def __init__(self, c, A, row_lo, row_hi, lb, ub):
        self.args = (np.asarray(c, float), A.toarray(), row_lo, row_hi)

    def solve(self, lb, ub):
        c, A, lo, hi = self.args
        r = _dense_solve(c, A, lo, hi, lb, ub)
        if r.status == "optimal":
            return "optimal", r.objective, r.x
        if r.status == "infeasible":
            return "infeasible", math.inf, None
        if r.status == "unbounded":
            return "unbounded", -math.inf, None
        raise RuntimeError("dense simplex hit its iteration limit")


ENGINES = {"highs": HighsEngine, "simplex": DenseSimplexEngine}


def _make_engine(model: MilpModel, engine: str):
    if engine not in ENGINES:
        raise ValueError(f"unknown LP engine {engine!r}; choose from {sorted(ENGINES)}")
    c, A, lo, hi, lb, ub, is_int = model.arrays()
    return ENGINES[engine](c, A, lo, hi, lb, ub), lb, ub, is_int


def _fractionality(x, is_int):
    f = np.zeros_like(x)
    f[is_int] = np.abs(x[is_int] - np.round(x[is_int]))
    return f


def solve_lp_relaxation(model: MilpModel, engine: str = "highs") -> MilpSolution:
    """Solve ``model`` with every integrality restriction dropped."""
    eng, lb, ub, _ = _make_engine(model, engine)
    st, obj, x = eng.solve(lb, ub)
    names = list(model.var_names)
    if st == "optimal":
        obj += model.obj_offset
        return MilpSolution(Status.OPTIMAL, obj, obj, 0.0, x, names, 1, obj)
    status = Status.INFEASIBLE if st == "infeasible" else Status.UNBOUNDED
    return MilpSolution(status, var_names=names, message=f"LP relaxation {st}")


class _Search:
    def __init__(self, model, engine, rel_gap, time_limit, int_tol, feas_tol):
        self.model = model
        self.eng, self.lb0, self.ub0, self.is_int = _make_engine(model, engine)
        self.int_idx = np.flatnonzero(self.is_int)
        self.lb0 = self.lb0.copy()
        self.ub0 = self.ub0.copy()
        # integer bounds can be rounded inward
        self.lb0[self.int_idx] = np.ceil(self.lb0[self.int_idx] - int_tol)
        self.ub0[self.int_idx] = np.floor(self.ub0[self.int_idx] + int_tol)
        self.rel_gap, self.int_tol, self.feas_tol = rel_gap, int_tol, feas_tol
        self.deadline = time.monotonic() + time_limit if time_limit else math.inf
        self.incumbent: Optional[np.ndarray] = None
        self.inc_obj = math.inf
        self.lp_calls = 0

    def timed_out(self):
        return time.monotonic() > self.deadline

    def lp(self, lb, ub):
        self.lp_calls += 1
        return self.eng.solve(lb, ub)

    def is_integral(self, x):
        return not np.any(_fractionality(x, self.is_int) > self.int_tol)

    def prune_threshold(self):
        if self.incumbent is None:
            return math.inf
        return self.inc_obj - self.rel_gap * max(abs(self.inc_obj), 1e-9)

    def offer(self, x, lb, ub):
        """Polish an integral point by fixing its integers and re-solving the LP."""
        xi = np.round(x[self.int_idx])
        flb, fub = lb.copy(), ub.copy()
        flb[self.int_idx] = xi
        fub[self.int_idx] = xi
        st, obj, xp = self.lp(flb, fub)
        if st != "optimal":
            return False
        xp[self.int_idx] = xi
        if obj < self.inc_obj - 1e-12 * max(1.0, abs(obj)):
            self.incumbent, self.inc_obj = xp, obj
            return True
        return False

    def dive(self, x, lb, ub, up=False):
        """Fix integers one at a time and re-solve until the LP is integral.

        The default dive rounds the least fractional variable to its nearest
        integer. ``up=True`` rounds up the variable closest to its ceiling,
        which suits fixed-charge rows where opening a link keeps flows
        feasible. A fix that makes the LP infeasible is retried once in the
        other direction.
        """
        lb, ub = lb.copy(), ub.copy()
        for _ in range(DIVE_DEPTH):
            if self.timed_out():
                return
            frac = _fractionality(x, self.is_int)
            cand = np.flatnonzero(frac > self.int_tol)
            if cand.size == 0:
                self.offer(x, lb, ub)
                return
            # fix every already integral variable at once, then one fractional
            fixed = self.int_idx[frac[self.int_idx] <= self.int_tol]
            lb[fixed] = np.round(x[fixed])
            ub[fixed] = np.round(x[fixed])
            if up:
                j = int(cand[np.argmax(x[cand] - np.floor(x[cand]))])
                first = math.ceil(x[j])
            else:
                j = int(cand[np.argmin(frac[cand])])
                first = math.ceil(x[j]) if x[j] - math.floor(x[j]) >= 0.5 else math.floor(x[j])
            second = math.floor(x[j]) if first > x[j] else math.ceil(x[j])
            for v in (first, second):
                v = min(max(v, lb[j]), ub[j])
                tlb, tub = lb.copy(), ub.copy()
                tlb[j] = tub[j] = v
                st, obj, nx = self.lp(tlb, tub)
                if st == "optimal":
                    break
            # a dive may still improve on the incumbent inside the gap tolerance
            if st != "optimal" or obj >= self.inc_obj:
                return
            lb, ub, x = tlb, tub, nx

    def rounding(self, x, lb, ub):
        for fn in (np.ceil, np.round):
            y = x.copy()
            y[self.int_idx] = np.clip(fn(x[self.int_idx] - (1e-9 if fn is np.ceil else 0)),
                                      lb[self.int_idx], ub[self.int_idx])
            self.offer(y, lb, ub)
        self.dive(x, lb, ub)
        self.dive(x, lb, ub, up=True)

    def run(self) -> MilpSolution:
        model = self.model
        names = list(model.var_names)
        if np.any(self.lb0 > self.ub0):
            return MilpSolution(Status.INFEASIBLE, var_names=names,
                                message="integer bounds are empty")
        st, root_obj, x = self.lp(self.lb0, self.ub0)
        if st == "infeasible":
            return MilpSolution(Status.INFEASIBLE, var_names=names, nodes=1,
                                message="LP relaxation infeasible")
        if st == "unbounded":
            return MilpSolution(Status.UNBOUNDED, var_names=names, nodes=1,
                                message="LP relaxation unbounded")
        heap = []
        seq = 0
        nodes = 0
        pruned_min = math.inf

        def push(obj, changes, x, lb, ub):
            nonlocal seq, pruned_min
            if self.is_integral(x):
                self.offer(x, lb, ub)
                # the leaf's own LP value stays part of the proven bound
                if obj < self.inc_obj:
                    pruned_min = min(pruned_min, obj)
                return
            if obj >= self.prune_threshold():
                if obj < self.inc_obj:
                    pruned_min = min(pruned_min, obj)
                return
            frac = _fractionality(x, self.is_int)
            # most fractional; argmax returns the lowest index on ties
            score = np.where(frac > self.int_tol, -np.abs(frac - 0.5), -np.inf)
            j = int(np.argmax(score))
            seq += 1
            heapq.heappush(heap, (obj, seq, changes, j, float(x[j])))

        self.rounding(x, self.lb0, self.ub0)
        push(root_obj, (), x, self.lb0, self.ub0)
        while heap:
            if self.timed_out():
                break
            bound, _, changes, j, v = heapq.heappop(heap)
            if bound >= self.prune_threshold():
                if bound < self.inc_obj:
                    pruned_min = min(pruned_min, bound)
                continue
            nodes += 1
            lb, ub = self.lb0.copy(), self.ub0.copy()
            for k, lo, hi in changes:
                lb[k], ub[k] = lo, hi
            if nodes % HEURISTIC_EVERY == 0:
                hst, _, hx = self.lp(lb, ub)
                if hst == "optimal":
                    self.rounding(hx, lb, ub)
                if bound >= self.prune_threshold():
                    if bound < self.inc_obj:
                        pruned_min = min(pruned_min, bound)
                    continue
            for lo, hi in ((lb[j], math.floor(v)), (math.ceil(v), ub[j])):
                if lo > hi:
                    continue
                clb, cub = lb.copy(), ub.copy()
                clb[j], cub[j] = lo, hi
                cst, cobj, cx = self.lp(clb, cub)
                if cst != "optimal":
                    continue
                push(max(cobj, bound), changes + ((j, lo, hi),), cx, clb, cub)
        nodes = max(nodes, 1)
        open_min = heap[0][0] if heap else math.inf
        best_bound = min(open_min, pruned_min, self.inc_obj)
        off = model.obj_offset
        if self.incumbent is None:
            if heap:
                return MilpSolution(Status.TIME_LIMIT, bound=best_bound + off, var_names=names,
                                    nodes=nodes, root_bound=root_obj + off,
                                    message="time limit reached without a feasible point")
            return MilpSolution(Status.INFEASIBLE, var_names=names, nodes=nodes,
                                root_bound=root_obj + off, message="no integer feasible point")
        obj = self.inc_obj + off
        bnd = best_bound + off
        gap = relative_gap(obj, bnd)
        status = Status.OPTIMAL if gap <= self.rel_gap + 1e-12 else Status.FEASIBLE
        msg = "" if status is Status.OPTIMAL else "stopped with an open gap"
        return MilpSolution(status, obj, bnd, gap, self.incumbent, names, nodes,
                            root_obj + off, msg)


def solve(model: MilpModel, rel_gap: float = REL_GAP, time_limit: Optional[float] = None,
          int_tol: float = INT_TOL, feas_tol: float = FEAS_TOL,
          engine: str = "highs") -> MilpSolution:
    """Solve a minimisation MILP to ``rel_gap`` by branch and bound.

    Parameters
    ----------
    model : MilpModel
    rel_gap : float
        Stop once ``(objective - bound) / |objective|`` falls to this value.
    time_limit : float, optional
        Wall-clock seconds. When it expires the best incumbent is returned
        with status ``FEASIBLE`` (or ``TIME_LIMIT`` if there is none).
    int_tol, feas_tol : float
        Integrality and primal feasibility tolerances.
    engine : {"highs", "simplex"}
        LP engine used at every node.

    Returns
    -------
    MilpSolution
        Infeasible and unbounded models are reported through ``status``.
    """
    if rel_gap < 0:
        raise ModelError("rel_gap must be non-negative")
    return _Search(model, engine, rel_gap, time_limit, int_tol, feas_tol).run()
