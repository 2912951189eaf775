"""Dense bounded-variable primal simplex.

Solves ``min c.x  s.t.  lo <= A x <= hi,  lb <= x <= ub`` exactly (up to
floating point) for small models. Rows are turned into equalities with one
bounded slack each, ``A x - s = 0``, and a two-phase method with one
artificial per row finds a first feasible basis. Nonbasic variables sit at
a finite bound, or at zero when free. Pricing is Dantzig's rule with ties
broken by the lowest index, switching to Bland's rule after a run of
degenerate pivots so the method cannot cycle.

This engine exists as an independent reference for the sparse LP engine
used by branch and bound; it refactors the basis from scratch each pivot
and is only meant for models with a few hundred columns.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

TOL = 1e-9


@dataclass
class LPResult:
    status: str  # "optimal", "infeasible", "unbounded", "iteration-limit"
    objective: float = math.nan
    x: Optional[np.ndarray] = None
    iterations: int = 0


def _initial_values(lb, ub):
    x = np.where(np.isfinite(lb), lb, np.where(np.isfinite(ub), ub, 0.0))
    return x.astype(float)


def _simplex_core(M, cost, lb, ub, basis, x, max_iter, tol=TOL):
    """Run primal simplex on ``M z = 0`` from a feasible basis.

    ``x`` holds the values of every column; basic entries are recomputed.
    Returns ``(status, basis, x, iterations)``.
    """
    m, ntot = M.shape
    in_basis = np.zeros(ntot, dtype=bool)
    in_basis[basis] = True
    degenerate_run = 0
    for it in range(max_iter):
        B = M[:, basis]
        nonbasic = np.flatnonzero(~in_basis)
        rhs = -M[:, nonbasic] @ x[nonbasic]
        x[basis] = np.linalg.solve(B, rhs)
        y = np.linalg.solve(B.T, cost[basis])
        d = cost - M.T @ y
        can_up = (~in_basis) & (d < -tol) & (x < ub - tol)
        can_dn = (~in_basis) & (d > tol) & (x > lb + tol)
        cand = np.flatnonzero(can_up | can_dn)
        if cand.size == 0:
            return "optimal", basis, x, it
        if degenerate_run > 50:
            j = int(cand[0])
        else:
            # largest reduced cost magnitude, lowest index on ties
            j = int(cand[np.argmax(np.abs(d[cand]))])
        direction = 1.0 if d[j] < 0 else -1.0
        w = np.linalg.solve(B, M[:, j])
        # basic values move by -direction * t * w
        delta = -direction * w
        t_best = ub[j] - lb[j]
        leave = -1
        leave_to = None
        for r in range(m):
            if abs(delta[r]) <= tol:
                continue
            bi = basis[r]
            if delta[r] < 0:
                if math.isinf(lb[bi]):
                    continue
                t = (x[bi] - lb[bi]) / -delta[r]
                target = lb[bi]
            else:
                if math.isinf(ub[bi]):
                    continue
                t = (ub[bi] - x[bi]) / delta[r]
                target = ub[bi]
            t = max(t, 0.0)
            if t < t_best - tol or (abs(t - t_best) <= tol and leave >= 0 and bi < basis[leave]):
                t_best, leave, leave_to = t, r, target
        if math.isinf(t_best):
            return "unbounded", basis, x, it
        degenerate_run = degenerate_run + 1 if t_best <= tol else 0
        x[j] += direction * t_best
        if leave < 0:
            # bound flip of the entering variable
            x[j] = ub[j] if direction > 0 else lb[j]
            continue
        out = basis[leave]
        x[basis] += delta * t_best
        x[out] = leave_to
        in_basis[out] = False
        in_basis[j] = True
        basis[leave] = j
    return "iteration-limit", basis, x, max_iter


def solve_lp(c, A, row_lo, row_hi, lb, ub, max_iter: int = 20000) -> LPResult:
    """Solve a bounded LP with the two-phase bounded-variable simplex."""
    A = np.asarray(A.toarray() if hasattr(A, "toarray") else A, dtype=float)
    c = np.asarray(c, dtype=float)
    m, n = A.shape
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    if np.any(lb > ub + TOL) or np.any(np.asarray(row_lo) > np.asarray(row_hi) + TOL):
        return LPResult("infeasible")
    if m == 0:
        x = np.where(c > 0, lb, np.where(c < 0, ub, _initial_values(lb, ub)))
        if not np.all(np.isfinite(x)):
            return LPResult("unbounded")
        return LPResult("optimal", float(c @ x), x)
    # columns: x (n), slacks (m), artificials (m)
    zl = np.concatenate([lb, row_lo, np.zeros(m)])
    zu = np.concatenate([ub, row_hi, np.full(m, np.inf)])
    z = _initial_values(zl, zu)
    z[n + m:] = 0.0
    resid = -(A @ z[:n] - z[n:n + m])
    sign = np.where(resid >= 0, 1.0, -1.0)
    M = np.hstack([A, -np.eye(m), np.diag(sign)])
    z[n + m:] = np.abs(resid)
    basis = np.arange(n + m, n + 2 * m)
    cost1 = np.concatenate([np.zeros(n + m), np.ones(m)])
    status, basis, z, it1 = _simplex_core(M, cost1, zl, zu, basis, z, max_iter)
    if status == "iteration-limit":
        return LPResult(status, iterations=it1)
    infeas = float(z[n + m:].sum())
    if infeas > 1e-7 * max(1.0, np.abs(z[:n + m]).max(initial=0.0)):
        return LPResult("infeasible", iterations=it1)
    # freeze artificials at zero for phase two
    zu[n + m:] = 0.0
    z[n + m:] = np.clip(z[n + m:], 0.0, 0.0)
    cost2 = np.concatenate([c, np.zeros(2 * m)])
    status, basis, z, it2 = _simplex_core(M, cost2, zl, zu, basis, z, max_iter)
    x = z[:n].copy()
    if status != "optimal":
        return LPResult(status, iterations=it1 + it2)
    return LPResult("optimal", float(c @ x), x, it1 + it2)
