import math
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mmtransit.milp import (BINARY, CONTINUOUS, INTEGER, MilpModel, ModelError, Status,
                            check_solution, relative_gap, solve, solve_lp_relaxation)
from mmtransit.milp.external import solve_external
from mmtransit.milp.io import export_model, import_model
from mmtransit.milp.simplex import solve_lp

from oracles import knapsack_best


def knapsack(values, weights, cap):
    m = MilpModel("knap")
    xs = [m.add_var(f"x{i}", 0, 1, BINARY, -float(v)) for i, v in enumerate(values)]
    m.add_constr({x: float(w) for x, w in zip(xs, weights)}, "<=", float(cap), "cap")
    return m


def transportation():
    m = MilpModel("transp")
    c = [[1, 2], [2, 1]]
    x = {(i, j): m.add_var(f"x{i}{j}", obj=c[i][j]) for i in range(2) for j in range(2)}
    for i in range(2):
        m.add_constr({x[(i, 0)]: 1, x[(i, 1)]: 1}, "=", 1, f"s{i}")
    for j in range(2):
        m.add_constr({x[(0, j)]: 1, x[(1, j)]: 1}, ">=", 1, f"d{j}")
    return m


def test_single_integer():
    m = MilpModel()
    x = m.add_var("x", 0, math.inf, INTEGER, 1.0)
    m.add_constr({x: 1.0}, ">=", 2.5)
    s = solve(m)
    assert s.status is Status.OPTIMAL and s.objective == pytest.approx(3.0)


def test_feasibility_problem():
    m = MilpModel()
    x = m.add_var("x", 0, 5, INTEGER)
    m.add_constr({x: 1.0}, ">=", 1)
    s = solve(m)
    assert s.status is Status.OPTIMAL and s.objective == 0.0


def test_infeasible_and_unbounded_are_statuses():
    m = MilpModel()
    x = m.add_var("x", 0, 1, INTEGER)
    m.add_constr({x: 1.0}, ">=", 2)
    assert solve(m).status is Status.INFEASIBLE
    m = MilpModel()
    m.add_var("x", -math.inf, math.inf, CONTINUOUS, 1.0)
    assert solve(m).status is Status.UNBOUNDED


def test_structural_errors():
    m = MilpModel()
    m.add_var("x")
    with pytest.raises(ModelError):
        m.add_var("x")
    with pytest.raises(ModelError):
        m.add_var("y", 2, 1)
    with pytest.raises(ModelError):
        m.add_constr({5: 1.0}, "<=", 1)
    with pytest.raises(ModelError):
        m.add_constr({0: 1.0}, "<>", 1)


@given(seed=st.integers(0, 10_000))
def test_knapsack_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    v = rng.integers(1, 30, 10).astype(float)
    w = rng.integers(1, 20, 10).astype(float)
    cap = float(rng.integers(10, 60))
    m = knapsack(v, w, cap)
    s = solve(m)
    assert s.status is Status.OPTIMAL
    assert -s.objective == pytest.approx(knapsack_best(v, w, cap), abs=1e-6)
    assert check_solution(m, s.x) == []
    lp = solve_lp_relaxation(m)
    assert lp.objective <= s.objective + 1e-6
    assert s.gap == pytest.approx(relative_gap(s.objective, s.bound), abs=1e-12)


def test_transportation_lp():
    m = transportation()
    assert solve_lp_relaxation(m).objective == pytest.approx(2.0)
    assert solve(m).objective == pytest.approx(2.0)


def test_relaxation_identity_without_integers():
    m = transportation()
    a, b = solve(m), solve_lp_relaxation(m)
    assert a.objective == pytest.approx(b.objective)
    assert np.allclose(a.x, b.x)


@given(seed=st.integers(0, 10_000), c=st.floats(0.1, 50))
def test_objective_scaling(seed, c):
    rng = np.random.default_rng(seed)
    v = rng.integers(1, 30, 8).astype(float)
    w = rng.integers(1, 20, 8).astype(float)
    a = solve(knapsack(v, w, 30))
    b = solve(knapsack(c * v, w, 30))
    assert b.objective == pytest.approx(c * a.objective, rel=1e-9)
    assert knapsack(v, w, 30).objective_value(b.x) == pytest.approx(a.objective, rel=1e-9)


def test_deterministic():
    rng = np.random.default_rng(3)
    m = knapsack(rng.integers(1, 30, 10), rng.integers(1, 20, 10), 40)
    a, b = solve(m), solve(m)
    assert np.array_equal(a.x, b.x) and a.nodes == b.nodes


@pytest.mark.parametrize("fmt", ["lp", "mps"])
def test_round_trip_preserves_model(fmt):
    m = MilpModel("rt")
    x = m.add_var("x", 0, 4, INTEGER, 1.5)
    y = m.add_var("y", -2, math.inf, CONTINUOUS, -1.0)
    z = m.add_var("z", 0, 1, BINARY, 2.0)
    m.add_constr({x: 1, y: 2}, "<=", 7, "le")
    m.add_constr({x: 1, z: -1}, ">=", -1, "ge")
    m.add_constr({y: 1, z: 3}, "=", 2, "eq")
    r = import_model(export_model(m, fmt), fmt)
    assert r.var_names == m.var_names and r.vtype == m.vtype
    assert r.lb == m.lb and r.ub == m.ub and r.obj == m.obj
    c1, A1, lo1, hi1, *_ = m.arrays()
    c2, A2, lo2, hi2, *_ = r.arrays()
    assert np.allclose(A1.toarray(), A2.toarray())
    assert np.array_equal(lo1, lo2) and np.array_equal(hi1, hi2)
    assert solve(r).objective == pytest.approx(solve(m).objective)


def test_external_solver_agrees():
    rng = np.random.default_rng(8)
    m = knapsack(rng.integers(1, 30, 10), rng.integers(1, 20, 10), 45)
    ext = solve_external(m, f"{sys.executable} -m mmtransit.milp.external")
    assert ext.objective == pytest.approx(solve(m).objective, abs=1e-6)
    assert check_solution(m, ext.x) == []


@given(seed=st.integers(0, 10_000))
def test_simplex_matches_highs(seed):
    rng = np.random.default_rng(seed)
    n, k = 6, 4
    A = rng.uniform(-1, 2, (k, n))
    x0 = rng.uniform(0, 3, n)
    b = A @ x0 + rng.uniform(0, 1, k)
    c = rng.uniform(-1, 2, n)
    m = MilpModel()
    for j in range(n):
        m.add_var(f"x{j}", 0, 5, CONTINUOUS, c[j])
    for i in range(k):
        m.add_constr({j: A[i, j] for j in range(n)}, "<=", b[i])
    ref = solve_lp_relaxation(m)
    cc, AA, lo, hi, lb, ub, _ = m.arrays()
    own = solve_lp(cc, AA.toarray(), lo, hi, lb, ub)
    assert own.objective == pytest.approx(ref.objective, rel=1e-7, abs=1e-7)
    assert solve(m, engine="simplex").objective == pytest.approx(ref.objective, abs=1e-7)


def test_time_limit_keeps_incumbent():
    rng = np.random.default_rng(1)
    m = knapsack(rng.integers(1, 100, 30), rng.integers(1, 100, 30), 500)
    s = solve(m, time_limit=0.0)
    assert s.status in (Status.OPTIMAL, Status.FEASIBLE, Status.TIME_LIMIT)
    if s.x is not None:
        assert check_solution(m, s.x) == []
        assert s.bound <= s.objective + 1e-9
