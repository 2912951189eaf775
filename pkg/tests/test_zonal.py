import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mmtransit.milp import Status, solve_lp_relaxation
from mmtransit.synthetic import random_zonal_instance
from mmtransit.zonal import (InfeasibleModelError, UnreachableDemandError, ZonalOptions,
                             ZonalSolution, disaggregate_od_flows, solve_zonal, summarize,
                             validate_zonal)

from helpers import line_instance

NOCAP = ZonalOptions(include_capacity=False)


def solved(inst, opts=None, **kw):
    return solve_zonal(inst.build(opts), **kw)


def test_two_zone_closed_form():
    inst = line_instance([[0, 100], [0, 0]], ["LBUS"])
    sol = solved(inst)
    c, g = inst.costs, inst.profile.globals
    bus = inst.profile.mode("LBUS")
    t, d = c.link_time[("LBUS", 0, 1)], c.link_dist[("LBUS", 0, 1)]
    expect = (100 * g.vot * (c.start[0, 0] + t + c.end[0, 1])
              + 100 / bus.design_occ * (bus.op_cost * t + bus.em_cost * d)
              + 100 * (c.feeder_op[0, 0] + c.feeder_op[0, 1]))
    assert sol.status is Status.OPTIMAL
    assert sol.objective == pytest.approx(expect, rel=1e-9)
    assert sol.fl[(0, "LBUS", 0, 1)] == pytest.approx(100)
    assert sol.xl[("LBUS", 0, 1)] == sol.xl[("LBUS", 1, 0)] >= 1


def test_end_feeder_zone_option():
    inst = line_instance([[0, 100], [0, 0]], ["LBUS"], lengths=[2.0, 8.0])
    dest = solved(inst)
    orig = solved(inst, ZonalOptions(end_feeder_zone="origin"))
    c = inst.costs
    assert orig.objective - dest.objective == pytest.approx(
        100 * (c.feeder_op[0, 0] - c.feeder_op[0, 1]), rel=1e-9)
    with pytest.raises(ValueError):
        ZonalOptions(end_feeder_zone="both")


def test_zero_demand():
    inst = line_instance(np.zeros((3, 3)), ["LBUS", "SAV"])
    sol = solved(inst)
    assert sol.objective == 0.0
    assert all(v == 0 for v in list(sol.fa.values()) + list(sol.fl.values()))


def test_unreachable_demand_named_before_solve():
    inst = line_instance([[0, 0, 5], [0, 0, 0], [0, 0, 0]], ["LBUS"], pairs=[(0, 1)])
    with pytest.raises(UnreachableDemandError) as err:
        inst.build()
    assert (0, 2) in err.value.pairs


def test_budget_zero_excludes_unbuilt_infrastructure():
    inst = line_instance([[0, 80, 40], [30, 0, 60], [10, 20, 0]], ["RAIL", "LBUS"])
    sol = solved(inst, ZonalOptions(budget=0.0))
    assert sol.link_flow("RAIL") == {} or max(sol.link_flow("RAIL").values()) == 0
    assert all(v == 0 for (o, m), v in sol.fa.items() if m == "RAIL")


def test_infeasible_model_raises():
    inst = line_instance([[0, 5000], [0, 0]], ["SAV"])
    g = dataclasses.replace(inst.profile.globals, sav_start_cap=10.0)
    inst = dataclasses.replace(inst, profile=dataclasses.replace(inst.profile, globals=g))
    with pytest.raises(InfeasibleModelError):
        solved(inst)


def test_existing_links_used_at_zero_budget():
    E = [[0, 300], [300, 0]]
    a = solved(line_instance(E, ["RAIL", "LBUS"]), ZonalOptions(budget=0))
    b = solved(line_instance(E, ["RAIL", "LBUS"], existing={"RAIL": {(0, 1): 1}}),
               ZonalOptions(budget=0))
    assert b.objective <= a.objective + 1e-9
    assert b.xw[("RAIL", 0, 1)] == 0


def _fixed_infra_instance(seed):
    inst = random_zonal_instance(5, ["RAIL", "LBUS", "WALK"], seed=seed,
                                 existing={"RAIL": {(0, 1): 1, (1, 2): 1}})
    return inst


@pytest.mark.parametrize("seed", range(4))
def test_zero_budget_is_a_linear_program(seed):
    inst = _fixed_infra_instance(seed)
    zm = inst.build(ZonalOptions(budget=0.0))
    sol = solve_zonal(zm)
    assert sol.nodes <= 1 and sol.gap == pytest.approx(0.0, abs=1e-9)
    assert sol.root_bound == pytest.approx(sol.objective, rel=1e-9)


def test_injected_fault_is_reported():
    inst = random_zonal_instance(4, ["LBUS", "SAV"], seed=2)
    sol = solved(inst)
    assert validate_zonal(sol).ok
    key = next(k for k, v in sorted(sol.fl.items()) if v > 1)
    fl = dict(sol.fl)
    fl[key] += 1.0
    bad = dataclasses.replace(sol, fl=fl)
    rep = validate_zonal(bad)
    o, m, i, j = key
    assert any(v.eq == "balance" and v.index == (o, m, j) for v in rep.violations)


def test_backflow_counterexample_flagged():
    inst = line_instance([[0, 60, 0], [0, 0, 0], [0, 40, 0]], ["LBUS"])
    opts = ZonalOptions(include_min_flow=True, include_no_backflow=True)
    sol = solved(inst, opts)
    assert validate_zonal(sol).ok
    fl = dict(sol.fl)
    fl[(0, "LBUS", 0, 1)] += 5.0
    fl[(0, "LBUS", 1, 0)] = 5.0
    rep = validate_zonal(dataclasses.replace(sol, fl=fl))
    assert {"backflow", "direction-flow"} & {v.eq for v in rep.violations}


def test_single_path_disaggregation():
    inst = line_instance([[0, 0, 70], [0, 0, 0], [0, 0, 0]], ["LBUS"])
    sol = solved(inst)
    pf = disaggregate_od_flows(sol, inst.demand, 0)
    [(arcs, f)] = pf.paths[2]
    assert f == pytest.approx(70)
    assert [a for a in arcs if a[0] == "link"] == [("link", "LBUS", 0, 1), ("link", "LBUS", 1, 2)]


def test_shared_first_link_splits():
    inst = line_instance([[0, 0, 30, 50], [0] * 4, [0] * 4, [0] * 4], ["LBUS"])
    sol = solved(inst)
    pf = disaggregate_od_flows(sol, inst.demand, 0)
    assert pf.total(2) == pytest.approx(30) and pf.total(3) == pytest.approx(50)
    on01 = sum(f for d in pf.paths for arcs, f in pf.paths[d] if ("link", "LBUS", 0, 1) in arcs)
    assert on01 == pytest.approx(sol.fl[(0, "LBUS", 0, 1)])


def test_summarize_single_mode():
    inst = line_instance([[0, 40, 20], [10, 0, 30], [5, 5, 0]], ["LBUS"])
    m = summarize(solved(inst))
    assert m.split_trips == {"LBUS": pytest.approx(100.0)}
    assert m.split_distance == {"LBUS": pytest.approx(100.0)}
    assert m.journey_time == pytest.approx(m.start_time + m.interzonal_time + m.transfer_time
                                           + m.end_time)


def test_summarize_hand_built_two_paths():
    inst = line_instance([[0, 60, 40], [0, 0, 0], [0, 0, 0]], ["LBUS", "WALK"],
                         pairs=[(0, 1), (0, 2)])
    zm = inst.build()
    c = inst.costs
    L, W = c.index("LBUS"), c.index("WALK")
    sol = ZonalSolution(Status.OPTIMAL, 0.0, 0.0, 0.0, 0, 0.0,
                        fa={(0, "LBUS"): 60.0, (0, "WALK"): 40.0},
                        fb={(0, "LBUS", 1): 60.0, (0, "WALK", 2): 40.0},
                        fl={(0, "LBUS", 0, 1): 60.0, (0, "WALK", 0, 2): 40.0},
                        fx={}, xl={("LBUS", 0, 1): 1, ("LBUS", 1, 0): 1}, xw={}, xp={},
                        context=zm, milp=None)
    m = summarize(sol)
    dL, dW = c.link_dist[("LBUS", 0, 1)], c.link_dist[("WALK", 0, 2)]
    tL, tW = c.link_time[("LBUS", 0, 1)], c.link_time[("WALK", 0, 2)]
    assert m.split_trips["LBUS"] == pytest.approx(60.0)
    assert m.split_distance["LBUS"] == pytest.approx(100 * 60 * dL / (60 * dL + 40 * dW))
    assert m.avg_distance["LBUS"] == pytest.approx(dL)
    assert m.avg_speed["WALK"] == pytest.approx(dW / tW)
    assert m.start_time == pytest.approx(60 * (60 * c.start[L, 0] + 40 * c.start[W, 0]) / 100)
    assert m.interzonal_time == pytest.approx(60 * (60 * tL + 40 * tW) / 100)
    assert m.end_time == pytest.approx(60 * (60 * c.end[L, 1] + 40 * c.end[W, 2]) / 100)
    bus = inst.profile.mode("LBUS")
    op = 60 * bus.op_cost * tL / bus.design_occ
    assert m.cost_per_pkm["LBUS"] == pytest.approx(100 * op / (60 * dL))
    assert "WALK" in m.cost_per_pkm and m.cost_per_pkm["WALK"] == 0.0


def test_objective_homogeneity():
    c = 3.0
    base = random_zonal_instance(4, ["LBUS", "SAV"], seed=5)
    prof = base.profile
    modes = tuple(dataclasses.replace(m, op_cost=c * m.op_cost, em_cost=c * m.em_cost,
                                      feeder_op_cost=c * m.feeder_op_cost,
                                      feeder_em_cost=c * m.feeder_em_cost) for m in prof.modes)
    g = dataclasses.replace(prof.globals, vot=c * prof.globals.vot)
    scaled = random_zonal_instance(4, ["LBUS", "SAV"], seed=5,
                                   profile=dataclasses.replace(prof, globals=g, modes=modes))
    a, b = solved(base), solved(scaled)
    assert b.objective == pytest.approx(c * a.objective, rel=1e-7)


@settings(max_examples=15)
@given(seed=st.integers(0, 10_000),
       modes=st.sampled_from([["LBUS", "SAV"], ["BRT", "LBUS"], ["RAIL", "WALK", "SAV"]]),
       budget=st.sampled_from([0.0, 2e7, 1e9]))
def test_solutions_validate_and_conserve(seed, modes, budget):
    inst = random_zonal_instance(4, modes, seed=seed, complete=False)
    sol = solved(inst, ZonalOptions(budget=budget))
    assert validate_zonal(sol).ok
    E = inst.demand.matrix
    for o in range(E.shape[0]):
        if E[o].sum() == 0:
            continue
        pf = disaggregate_od_flows(sol, inst.demand, o)
        started = sum(v for (oo, m), v in sol.fa.items() if oo == o)
        assert sum(pf.total(d) for d in pf.paths) == pytest.approx(started, rel=1e-6)
        for d in range(E.shape[0]):
            assert pf.total(d) == pytest.approx(E[o, d], rel=1e-6, abs=1e-6)
    assert solve_lp_relaxation(inst.build(ZonalOptions(budget=budget)).model).objective \
        <= sol.objective * (1 + 1e-9) + 1e-9


def test_capacity_off_is_post_checked():
    inst = random_zonal_instance(4, ["LBUS", "SAV"], seed=1)
    sol = solved(inst, NOCAP)
    assert sol.capacity_report is not None
    assert validate_zonal(sol).ok
