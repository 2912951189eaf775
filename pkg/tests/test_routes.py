import time

import pytest
from hypothesis import given, settings, strategies as st

from mmtransit.routes import (ModeFlows, RouteError, SegmentNetwork, assemble_routes,
                              build_route_model, count_transfers, derive_segments,
                              generate_routes, myopic_routes, segment_count, solve_routes)

from routes_util import consistency_residuals, degree_ok, seven_zone, random_runs


@pytest.mark.parametrize("flow,expected", [(100, 1), (1000, 3), (360, 1), (361, 2), (0, 0)])
def test_segment_count(flow, expected):
    assert segment_count(flow, 5 / 60, 30) == expected


def test_zero_flow_links_excluded():
    flows = ModeFlows("LBUS", [(0, 2, (0, 1, 2), 50.0), (3, 4, (3, 4), 0.0)])
    net = derive_segments(flows, "LBUS", h_design=1 / 12, r_design=30)
    assert set(net.counts) == {(0, 1), (1, 2)}


def test_derive_segments_uses_larger_direction():
    flows = ModeFlows("LBUS", [(0, 1, (0, 1), 500.0), (1, 0, (1, 0), 1000.0)])
    net = derive_segments(flows, "LBUS", h_design=1 / 12, r_design=30)
    assert net.counts == {(0, 1): 3}
    uni = derive_segments(flows, "LBUS", h_design=1 / 12, r_design=30, bidirectional=False)
    assert uni.counts == {(0, 1): 2, (1, 0): 3}


def test_seven_zone_transfers():
    net, flows = seven_zone()
    t0 = time.perf_counter()
    rsol = solve_routes(build_route_model(net, flows))
    plan = assemble_routes(rsol)
    my = myopic_routes(net, flows)
    assert time.perf_counter() - t0 < 5
    assert rsol.objective == pytest.approx(60, abs=1e-6)
    assert count_transfers(plan, flows).total == 60
    assert count_transfers(my, flows).total == 80
    assert [r.zones for r in plan.routes][0] == (1, 2, 5, 7)


def test_seven_zone_rows():
    net, flows = seven_zone()
    plan = assemble_routes(solve_routes(build_route_model(net, flows)))
    my = myopic_routes(net, flows)
    opt_rows = count_transfers(plan, flows).by_od
    my_rows = count_transfers(my, flows).by_od
    assert my_rows == {(1, 5): 0, (1, 7): 40, (2, 6): 0, (4, 6): 40, (3, 7): 0}
    assert opt_rows == {(1, 5): 0, (1, 7): 0, (2, 6): 50, (4, 6): 0, (3, 7): 10}


def test_seven_zone_with_two_segments_on_link_25():
    # a second 2-5 segment lets 2->6 ride through as well, so 60 is no longer optimal
    net, flows = seven_zone(n25=2)
    rsol = solve_routes(build_route_model(net, flows))
    assert rsol.objective == pytest.approx(50, abs=1e-6)
    assert count_transfers(assemble_routes(rsol), flows).total == 50


def test_single_link_has_no_transfers():
    flows = ModeFlows("LBUS", [(0, 1, (0, 1), 30.0)])
    net = derive_segments(flows, "LBUS", h_design=1 / 12, r_design=30)
    rsol = solve_routes(build_route_model(net, flows))
    assert rsol.objective == 0 and len(assemble_routes(rsol).routes) == 1


def test_collinear_links_chain():
    flows = ModeFlows("LBUS", [(0, 2, (0, 1, 2), 30.0)])
    net = derive_segments(flows, "LBUS", h_design=1 / 12, r_design=30)
    rsol = solve_routes(build_route_model(net, flows))
    assert rsol.objective == 0
    assert rsol.joined == [(1, (0, 1, 1), (1, 2, 1))]
    assert [r.zones for r in assemble_routes(rsol).routes] == [(0, 1, 2)]


def test_empty_network():
    flows = ModeFlows("LBUS", [])
    net = derive_segments(flows, "LBUS", h_design=1 / 12, r_design=30)
    rsol = solve_routes(build_route_model(net, flows))
    assert rsol.objective == 0 and assemble_routes(rsol).routes == []


def test_no_joins_gives_one_route_per_segment():
    net, flows = seven_zone()
    from mmtransit.routes import RouteGenSolution
    from mmtransit.milp import Status
    rsol = RouteGenSolution(Status.OPTIMAL, 0.0, {}, net, flows, {})
    plan = assemble_routes(rsol)
    assert plan.count == net.n_segments
    assert all(len(r.segments) == 1 for r in plan.routes)


def test_single_junction_myopic_is_optimal():
    flows = ModeFlows("LBUS", [(0, 2, (0, 1, 2), 30.0), (3, 2, (3, 1, 2), 20.0)])
    net = derive_segments(flows, "LBUS", h_design=1 / 12, r_design=30)
    rsol = solve_routes(build_route_model(net, flows))
    assert count_transfers(myopic_routes(net, flows), flows).total == pytest.approx(rsol.objective)


def test_uncovered_link_is_an_error():
    flows = ModeFlows("LBUS", [(0, 2, (0, 1, 2), 30.0)])
    net = SegmentNetwork("LBUS", {(0, 1): 30.0}, {(0, 1): 1})
    with pytest.raises(RouteError):
        build_route_model(net, flows)
    plan = myopic_routes(net, ModeFlows("LBUS", [(0, 1, (0, 1), 30.0)]))
    with pytest.raises(RouteError):
        count_transfers(plan, flows)


def test_count_transfers_single_break():
    flows = ModeFlows("LBUS", [(0, 2, (0, 1, 2), 40.0)])
    net = derive_segments(flows, "LBUS", h_design=1 / 12, r_design=30)
    from mmtransit.routes import RouteGenSolution
    from mmtransit.milp import Status
    plan = assemble_routes(RouteGenSolution(Status.OPTIMAL, 0.0, {}, net, flows, {}))
    assert count_transfers(plan, flows).total == 40


@settings(max_examples=30)
@given(seed=st.integers(0, 100_000), r=st.sampled_from([30.0, 6.0, 3.0]),
       bidir=st.booleans())
def test_random_instances_consistent(seed, r, bidir):
    flows = random_runs(seed)
    net = derive_segments(flows, "LBUS", h_design=1 / 12, r_design=r, bidirectional=bidir)
    rsol = solve_routes(build_route_model(net, flows))
    plan = assemble_routes(rsol)
    assert consistency_residuals(rsol) <= 1e-6
    assert degree_ok(rsol)
    assert count_transfers(plan, flows).total == pytest.approx(rsol.objective, abs=1e-6)
    assert rsol.objective <= count_transfers(myopic_routes(net, flows), flows).total + 1e-6
    segs = [u for rt in plan.routes for u in rt.segments]
    assert sorted(segs) == sorted(net.all_segments())


def test_routing_leaves_zonal_metrics_unchanged():
    from mmtransit.routes import mode_flows
    from mmtransit.synthetic import random_zonal_instance
    from mmtransit.zonal import disaggregate_od_flows, solve_zonal, summarize

    inst = random_zonal_instance(6, ["BRT", "LBUS", "SAV"], seed=4, complete=False)
    sol = solve_zonal(inst.build())
    before = vars(summarize(sol)).copy()
    paths = [disaggregate_od_flows(sol, inst.demand, o) for o in range(6)
             if inst.demand.matrix[o].sum() > 0]
    for spec in inst.profile.modes:
        if spec.is_transit:
            mf = mode_flows(paths, spec.name)
            if mf.runs:
                res = generate_routes(mf, spec)
                assert count_transfers(res.plan, mf).total == pytest.approx(
                    res.solution.objective, abs=1e-6)
    assert vars(summarize(sol)) == before
