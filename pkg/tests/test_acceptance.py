"""Acceptance criteria, one test per criterion.

A summary line per criterion is printed at the end of the run.
"""
import time

import numpy as np
import pytest

import test_costs
from mmtransit.costs import build_cost_tables, feeder_share
from mmtransit.milp import solve_lp_relaxation
from mmtransit.pipeline import load_config, run_scenario
from mmtransit.pipeline import documents as docs
from mmtransit.pipeline.io import read_json
from mmtransit.routes import (assemble_routes, build_route_model, count_transfers,
                              derive_segments, generate_routes, mode_flows, myopic_routes,
                              segment_count, solve_routes, ModeFlows)
from mmtransit.synthetic import ZonalInstance, random_zonal_instance, synthetic_city, \
    write_scenario_files
from mmtransit.zonal import (ZonalOptions, disaggregate_od_flows, solve_zonal, summarize,
                             validate_zonal)
from mmtransit.params import default_profile
from mmtransit.zoning import CandidateLinkSet, DemandMatrix, Maz, Zone, cluster_zones

from oracles import best_partition_objective, path_oracle
from routes_util import consistency_residuals, degree_ok, seven_zone, random_runs

criterion = pytest.mark.criterion


@criterion(1, "seven-zone route MILP 60 and myopic 80 transfers in under 5 s")
def test_c1_seven_zone_routes():
    t0 = time.perf_counter()
    net, flows = seven_zone()
    rsol = solve_routes(build_route_model(net, flows))
    opt = count_transfers(assemble_routes(rsol), flows).total
    my = count_transfers(myopic_routes(net, flows), flows).total
    elapsed = time.perf_counter() - t0
    assert rsol.objective == pytest.approx(60, abs=1e-9)
    assert (opt, my) == (60, 80)
    assert elapsed < 5


COST_EXAMPLES = [
    test_costs.test_clear_time_examples, test_costs.test_through_time_metro_example,
    test_costs.test_through_time_dwell_linearity, test_costs.test_sav_through_time_single_stop,
    test_costs.test_feeder_share_examples, test_costs.test_feeder_dist_time_examples,
    test_costs.test_start_end_costs_rail_example, test_costs.test_start_end_full_walk_coverage,
    test_costs.test_transfer_cost_examples, test_costs.test_interzonal_examples,
]


@criterion(2, "cost formula examples within 1e-9; feeder share clamps at 0 and is 1 for SAV")
def test_c2_cost_formulas(profile, g):
    for ex in COST_EXAMPLES:
        args = {"profile": profile, "g": g}
        names = ex.__code__.co_varnames[:ex.__code__.co_argcount]
        ex(**{k: args[k] for k in names})
    for m in profile.modes:
        for length in (0.0, 0.1, 0.5, 1.0, 3.0, 10.0, 40.0):
            eta = feeder_share(m, length, g.walk_speed)
            assert 0.0 <= eta <= 1.0
            if m.name == "SAV":
                assert eta == 1.0
    assert feeder_share(profile.mode("RAIL"), 0.2, g.walk_speed) == 0.0


def corridor_instance(seed, modes):
    """Four zones in a row with a long middle gap served by the first mode only.

    Trips between the ends then mix modes, so the oracle has to price
    transfers.
    """
    rng = np.random.default_rng(seed)
    prof = default_profile().select(modes)
    fast, slow = modes
    zones = [Zone(k, (0.0, 0.0), float(rng.uniform(1.0, 4.0)), k in (1, 2), [k], None)
             for k in range(4)]
    E = rng.integers(10, 200, (4, 4)) * (rng.random((4, 4)) < 0.6)
    np.fill_diagonal(E, 0)
    E[0, 3] = max(E[0, 3], 10)
    E = E.astype(float)
    chain = [(0, 1), (1, 0), (1, 2), (2, 1), (2, 3), (3, 2)]
    links = CandidateLinkSet({fast: [(1, 2), (2, 1)], slow: chain}, {fast: {}, slow: {}})
    gap = float(rng.uniform(5.0, 40.0))
    costs = build_cost_tables(zones, prof.modes, links.pairs, prof.globals,
                              {(1, 2): gap, (2, 1): gap})
    return ZonalInstance(zones, DemandMatrix(E, total_input=float(E.sum())), links, costs, prof)


@criterion(3, "branch and bound equals path enumeration on 30 instances within 1e-6, < 60 s")
def test_c3_zonal_oracle():
    mode_sets = [["LBUS", "SAV"], ["RAIL", "LBUS"], ["RAIL", "WALK"], ["METRO", "SAV"]]
    opts = ZonalOptions(budget=1e15, include_capacity=False)
    t0 = time.perf_counter()
    for seed in range(30):
        modes = mode_sets[seed % 4]
        if seed % 2:
            inst = corridor_instance(seed, modes)
        else:
            inst = random_zonal_instance(2 + seed % 3, modes, seed=seed, density=0.7)
        sol = solve_zonal(inst.build(opts), rel_gap=1e-9)
        assert sol.objective == pytest.approx(path_oracle(inst), rel=1e-6), seed
    assert time.perf_counter() - t0 < 60


@criterion(4, "validation empty on 50 instances; no-backflow and min-flow rows hold")
def test_c4_feasibility():
    mode_sets = [["LBUS", "SAV"], ["BRT", "LBUS", "SAV"], ["RAIL", "WALK", "SAV"],
                 ["METRO", "XBUS"]]
    for seed in range(50):
        side = bool(seed % 2)
        opts = ZonalOptions(budget=[0.0, 5e7, 1e9][seed % 3], include_min_flow=side,
                            include_no_backflow=side)
        inst = random_zonal_instance(3 + seed % 3, mode_sets[seed % 4], seed=100 + seed,
                                     complete=bool(seed % 3))
        sol = solve_zonal(inst.build(opts))
        rep = validate_zonal(sol)
        assert rep.ok, (seed, rep.violations[:3])
        if not side:
            continue
        tol = 1e-6
        for (o, m, i, j), v in sol.fl.items():
            if v > tol:
                assert sol.fl.get((o, m, j, i), 0.0) <= tol, (seed, o, m, i, j)
        specs = {m.name: m for m in sol.context.modes}
        for (m, i, j), x in sol.xl.items():
            if i > j or x <= 0:
                continue
            both = sum(v for (o, mm, a, b), v in sol.fl.items() if mm == m and {a, b} == {i, j})
            need = specs[m].link_min_flow * x
            assert 0.5 * both >= need - tol * max(1.0, need), (seed, m, i, j)


@criterion(5, "LP bound below MILP, gap consistent to 1e-9, zero-budget root gap 0")
def test_c5_bounds():
    for seed in range(12):
        inst = random_zonal_instance(4, ["BRT", "LBUS", "SAV"], seed=seed)
        for budget in (0.0, 4e7, 1e9):
            zm = inst.build(ZonalOptions(budget=budget))
            sol = solve_zonal(zm, rel_gap=1e-6)
            lp = solve_lp_relaxation(zm.model).objective
            assert lp <= sol.objective * (1 + 1e-9)
            assert sol.bound <= sol.objective * (1 + 1e-9)
            assert sol.gap == pytest.approx((sol.objective - sol.bound) / abs(sol.objective),
                                            abs=1e-9)
    for seed in range(8):
        inst = random_zonal_instance(5, ["RAIL", "LBUS", "WALK"], seed=seed,
                                     existing={"RAIL": {(0, 1): 1, (1, 2): 1}})
        sol = solve_zonal(inst.build(ZonalOptions(budget=0.0)))
        assert sol.nodes <= 1
        assert sol.gap == pytest.approx(0.0, abs=1e-9)
        assert sol.root_bound == pytest.approx(sol.objective, rel=1e-9)


@pytest.fixture(scope="module")
def ten_zone(tmp_path_factory):
    d = tmp_path_factory.mktemp("ten")
    city = synthetic_city(10, 4, 45, seed=7)
    cfg = load_config(write_scenario_files(city, d, 10, ["BRT", "LBUS", "SAV"], budget=0.0))
    run_scenario(cfg, ["cluster", "links", "costs"])
    out = cfg.out_dir
    zones, demand = docs.zones_from_doc(read_json(out / "zones.json"))
    return ZonalInstance(zones, demand, docs.links_from_doc(read_json(out / "links.json")),
                         docs.costs_from_doc(read_json(out / "costs.json")), cfg.profile)


@criterion(6, "objective weakly decreasing in budget and candidate links, strictly once")
def test_c6_monotonicity(ten_zone):
    budgets = [0.0, 1e8, 2e8, 3e8, 5e8]
    objs, sols = [], []
    for b in budgets:
        sols.append(solve_zonal(ten_zone.build(ZonalOptions(budget=b)), rel_gap=0.0))
        objs.append(sols[-1].objective)
    for a, b in zip(objs, objs[1:]):
        assert b <= a * (1 + 1e-9)
    assert objs[-1] < objs[0] * (1 - 1e-6)

    # nested candidate sets: drop the BRT links the widest budget built, one at a time
    built = sorted({(min(i, j), max(i, j)) for (m, i, j), x in sols[-1].xl.items()
                    if m == "BRT" and x > 0.5})
    assert built
    pairs = set(ten_zone.links.undirected("LBUS")) | set(ten_zone.links.undirected("BRT"))
    opts = ZonalOptions(budget=budgets[-1])
    chain = [objs[-1]]
    for p in built[:2]:
        pairs.discard(p)
        chain.append(solve_zonal(ten_zone.with_links(sorted(pairs)).build(opts),
                                 rel_gap=0.0).objective)
    for a, b in zip(chain, chain[1:]):
        assert b >= a * (1 - 1e-9)
    assert chain[-1] > chain[0] * (1 + 1e-9)


@criterion(7, "route consistency, degree rows, count equals objective, MILP <= myopic")
def test_c7_routes():
    for seed in range(30):
        flows = random_runs(seed)
        net = derive_segments(flows, "LBUS", h_design=1 / 12, r_design=30)
        rsol = solve_routes(build_route_model(net, flows))
        assert consistency_residuals(rsol) <= 1e-6
        assert degree_ok(rsol)
        plan = assemble_routes(rsol)
        assert count_transfers(plan, flows).total == round(rsol.objective)
        assert abs(rsol.objective - round(rsol.objective)) <= 1e-6
        assert rsol.objective <= count_transfers(myopic_routes(net, flows), flows).total + 1e-9

    inst = random_zonal_instance(5, ["LBUS", "SAV"], seed=3)
    sol = solve_zonal(inst.build())
    before = summarize(sol)
    paths = [disaggregate_od_flows(sol, inst.demand, o) for o in range(inst.demand.n)
             if inst.demand.matrix[o].sum() > 0]
    spec = inst.profile.mode("LBUS")
    lengths = {(i, j): d for (m, i, j), d in inst.costs.link_dist.items() if m == "LBUS"}
    generate_routes(mode_flows(paths, "LBUS"), spec, lengths, True)
    after = summarize(sol)
    for f in ("journey_time", "interzonal_time", "start_time", "end_time", "transfer_time",
              "operating_cost", "emissions_cost", "generalized_cost"):
        assert getattr(after, f) == getattr(before, f), f
    assert after.mode_time == before.mode_time and after.mode_op_cost == before.mode_op_cost


@criterion(8, "segment counts 1 and 3 at h = 5 min, r = 30; zero-flow links excluded")
def test_c8_segments():
    assert segment_count(100, 5 / 60, 30) == 1
    assert segment_count(1000, 5 / 60, 30) == 3
    flows = ModeFlows("LBUS", [(0, 2, (0, 1, 2), 50.0), (3, 4, (3, 4), 0.0)])
    net = derive_segments(flows, "LBUS", h_design=5 / 60, r_design=30)
    assert set(net.counts) == {(0, 1), (1, 2)}


@criterion(9, "20-zone pipeline: gap <= 2%, under 10 min, byte-reproducible")
def test_c9_pipeline(tmp_path):
    city = synthetic_city(20, 6, 200, seed=0, lines={"BRT": 2})
    path = write_scenario_files(city, tmp_path / "in", 20, ["BRT", "LBUS", "SAV"],
                                budget=5e8, seed=0, gap=0.02)
    cfg = load_config(path)
    t0 = time.perf_counter()
    run_scenario(cfg)
    assert time.perf_counter() - t0 < 600
    man = read_json(cfg.out_dir / "manifest.json")
    assert man["status"] == "complete"
    assert man["solver"]["gap"] <= 0.02
    again = cfg.with_overrides(out=str(tmp_path / "again"))
    run_scenario(again)
    timed = {"manifest.json", "report.txt", "table2.tsv"}
    names = sorted(p.name for p in cfg.out_dir.iterdir())
    assert names == sorted(p.name for p in again.out_dir.iterdir())
    for name in names:
        a, b = (cfg.out_dir / name).read_bytes(), (again.out_dir / name).read_bytes()
        if name == "table2.tsv":
            strip = lambda s: [r for r in s.decode().splitlines()
                               if not r.startswith("Computation time")]
            a, b = strip(a), strip(b)
        if name not in timed or name == "table2.tsv":
            assert a == b, name


@criterion(10, "weighted k-means equals brute-force partition on 20 cases within 1e-9")
def test_c10_clustering():
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        n = int(rng.integers(3, 9))
        k = int(rng.integers(1, min(n, 3) + 1))
        X = rng.uniform(0, 10, (n, 2))
        t = rng.integers(1, 20, n).astype(float)
        p = cluster_zones([Maz(i, *X[i], t[i]) for i in range(n)], k, rng_seed=seed)
        best = best_partition_objective(X, t ** 2, k)
        assert p.objective == pytest.approx(best, rel=1e-9, abs=1e-9), seed
