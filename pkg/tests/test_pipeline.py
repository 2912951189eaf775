import logging

import numpy as np
import pytest
from hypothesis import given, strategies as st
from shapely.geometry import LineString, box

from mmtransit.pipeline import (ReportBundle, StageError, config_from_dict,
                                import_existing_network, load_config, run_scenario, run_stage,
                                zone_sequence)
from mmtransit.pipeline.cli import main
from mmtransit.pipeline.documents import solution_from_doc, costs_from_doc, links_from_doc, \
    zones_from_doc
from mmtransit.pipeline.io import read_json, read_mazs, read_od, write_table
from mmtransit.pipeline.report import table2_rows, table3_rows
from mmtransit.params import ConfigError
from mmtransit.synthetic import synthetic_city, write_scenario_files
from mmtransit.zonal import summarize
from mmtransit.zoning import Zone

from helpers import line_instance

MODES = ["BRT", "LBUS", "SAV"]


@pytest.fixture(scope="module")
def small_city():
    return synthetic_city(8, 4, 30, seed=2, lines={"BRT": 1})


@pytest.fixture
def scenario(tmp_path, small_city):
    return write_scenario_files(small_city, tmp_path / "in", 8, MODES, budget=2e8, gap=0.0,
                                out=str(tmp_path / "out"))


@pytest.fixture(scope="module")
def finished(tmp_path_factory, small_city):
    d = tmp_path_factory.mktemp("done")
    cfg = load_config(write_scenario_files(small_city, d, 8, MODES, budget=2e8, gap=0.0))
    run_scenario(cfg)
    return cfg


# ------------------------------------------------------------------ config
def test_config_fields(scenario):
    cfg = load_config(scenario)
    assert cfg.k == 8 and cfg.budget == 2e8 and cfg.modes == tuple(MODES)
    assert cfg.mazs_path.is_file() and cfg.gap == 0.0
    c2 = cfg.with_overrides(seed=5, budget="1 B$", gap=0.02, time_limit=30, out="x")
    assert (c2.rng_seed, c2.budget, c2.gap, c2.time_limit) == (5, 1e9, 0.02, 30.0)


def _doc(tmp_path, **sections):
    (tmp_path / "m.csv").write_text("id,x_km,y_km\na,0,0\nb,5,0\n")
    (tmp_path / "o.csv").write_text("origin_id,dest_id,trips\na,b,10\n")
    doc = {"scenario": {"k": 2}, "inputs": {"mazs": "m.csv", "od": "o.csv"}}
    for k, v in sections.items():
        doc.setdefault(k, {}).update(v)
    return doc


def test_config_parameter_overrides(tmp_path):
    doc = _doc(tmp_path, solver={"time_limit": "2 min"},
               mode={"BRT": {"design_headway": "6 min"}}, globals={"vot": "20 $/h"})
    cfg = config_from_dict(doc, tmp_path)
    assert cfg.time_limit == pytest.approx(120.0)
    assert cfg.profile.mode("BRT").design_headway == pytest.approx(0.1)
    assert cfg.profile.globals.vot == 20.0


@pytest.mark.parametrize("bad", [
    {"scenario": {"k": 1}},
    {"scenario": {"budget": -5}},
    {"solver": {"name": "cplex"}},
    {"options": {"no_backflow": True}},
    {"inputs": {"city": "missing.geojson"}},
    {"scenario": {"modes": ["TRAM"]}},
    {"extra": {"a": 1}},
])
def test_config_errors(tmp_path, bad):
    with pytest.raises(ConfigError):
        config_from_dict(_doc(tmp_path, **bad), tmp_path)


# ---------------------------------------------------------------------- io
def test_read_inputs(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("id,x_km,y_km,trips\na,0,1,3\nb,2.5,0,0\n")
    assert [(m.id, m.x, m.trips) for m in read_mazs(p)] == [("a", 0.0, 3.0), ("b", 2.5, 0.0)]
    q = tmp_path / "o.csv"
    q.write_text("origin_id,dest_id,trips\na,b,10\n")
    assert read_od(q, scale=0.5) == [("a", "b", 5.0)]
    q.write_text("origin_id,dest_id,trips\na,b,ten\n")
    with pytest.raises(ValueError):
        read_od(q)
    q.write_text("from,to\na,b\n")
    with pytest.raises(ValueError):
        read_od(q)


def test_write_table_cells(tmp_path):
    p = write_table(tmp_path / "t.tsv", ("a", "b", "c"), [("x", None, np.float64(0.1))])
    assert p.read_text() == "a\tb\tc\nx\t/\t0.1\n"


# ------------------------------------------------------------------ network
def grid(nx=3, ny=3, s=2.0):
    return [Zone(b * nx + a, (a * s + s / 2, b * s + s / 2), 1.0, False, [], box(a * s, b * s,
                 a * s + s, b * s + s)) for b in range(ny) for a in range(nx)]


def test_line_through_three_zones():
    zones = grid()
    line = [(1.0, 3.0), (3.0, 5.0), (5.0, 5.0)]
    assert zone_sequence(LineString(line), zones) == [3, 7, 8]
    ex = import_existing_network({"RAIL": [line]}, zones)["RAIL"]
    assert ex == {(3, 7): 1, (7, 3): 1, (7, 8): 1, (8, 7): 1}


def test_parallel_lines_accumulate():
    zones = grid()
    lines = [[(0.5, 1.0), (3.5, 1.0)], [(0.5, 1.2), (3.5, 1.2)]]
    assert import_existing_network({"BRT": lines}, zones)["BRT"][(0, 1)] == 2


def test_u_shaped_line_counts_each_pair_once():
    zones = grid()
    line = [(1.0, 1.0), (3.0, 1.0), (3.0, 1.5), (1.0, 1.5)]
    assert zone_sequence(LineString(line), zones) == [0, 1, 0]
    assert import_existing_network({"RAIL": [line]}, zones)["RAIL"] == {(0, 1): 1, (1, 0): 1}


def test_line_outside_zones_skipped(caplog):
    with caplog.at_level(logging.WARNING):
        out = import_existing_network({"RAIL": [[(50, 50), (60, 60)]]}, grid())
    assert out["RAIL"] == {} and "outside" in caplog.text


@given(pts=st.lists(st.tuples(st.floats(-1, 7), st.floats(-1, 7)), min_size=2, max_size=6))
def test_import_is_orientation_invariant(pts):
    zones = grid()
    if len(set(pts)) < 2:
        return
    a = import_existing_network({"RAIL": [pts]}, zones)
    b = import_existing_network({"RAIL": [pts[::-1]]}, zones)
    assert a == b


# ----------------------------------------------------------------- scenario
def test_pipeline_outputs_and_manifest(finished):
    out = finished.out_dir
    for name in ("zones.json", "zones.geojson", "links.json", "costs.json", "solution.json",
                 "network_BRT.geojson", "routes.json", "routes.geojson", "table2.tsv",
                 "table3.tsv", "origin_splits.tsv", "report.txt"):
        assert (out / name).is_file(), name
    man = read_json(out / "manifest.json")
    assert man["status"] == "complete" and man["seed"] == finished.rng_seed
    assert all(not e["stale"] for e in man["files"].values())
    assert man["solver"]["gap"] <= 1e-6 and "numpy" in man["versions"]
    gj = read_json(out / "zones.geojson")
    assert len(gj["features"]) == 8 and gj["features"][0]["geometry"]["type"] == "Polygon"


def test_rerun_marks_downstream_stale(scenario):
    cfg = load_config(scenario)
    run_scenario(cfg)
    run_stage(cfg, "costs")
    man = read_json(cfg.out_dir / "manifest.json")
    assert man["stages"]["optimize"]["status"] == "stale"
    assert man["files"]["solution.json"]["stale"] and not man["files"]["costs.json"]["stale"]
    assert man["status"] == "partial"


def test_failed_stage_is_recorded(scenario):
    cfg = load_config(scenario)
    run_scenario(cfg, ["cluster", "links", "costs"])
    bad = cfg.with_overrides()
    bad.profile = bad.profile.select(["LBUS", "SAV"])
    with pytest.raises(StageError) as err:
        run_stage(bad, "optimize")
    assert err.value.stage == "optimize"
    man = read_json(cfg.out_dir / "manifest.json")
    assert man["stages"]["optimize"]["status"] == "failed" and man["status"] == "failed"


def test_stage_needs_previous_outputs(scenario):
    cfg = load_config(scenario)
    with pytest.raises(StageError):
        run_stage(cfg, "optimize")


def test_same_seed_same_bytes(scenario, tmp_path):
    cfg = load_config(scenario)
    run_scenario(cfg)
    other = cfg.with_overrides(out=str(tmp_path / "again"))
    run_scenario(other)
    for name in ("zones.json", "links.json", "costs.json", "solution.json", "routes.json",
                 "table3.tsv", "origin_splits.tsv"):
        assert (cfg.out_dir / name).read_bytes() == (other.out_dir / name).read_bytes(), name


# ----------------------------------------------------------------------- cli
def test_cli_pipeline_and_verbs(scenario, capsys):
    assert main(["pipeline", "--config", str(scenario)]) == 0
    assert "solution.json" in capsys.readouterr().out
    for verb in ("cluster", "links", "costs", "optimize", "routes", "report"):
        assert main([verb, "--config", str(scenario), "--gap", "0"]) == 0


def test_cli_input_error(tmp_path):
    assert main(["pipeline", "--config", str(tmp_path / "nope.toml")]) == 3


def test_cli_infeasible(tmp_path):
    city = synthetic_city(6, 3, 10, seed=1)
    path = write_scenario_files(city, tmp_path, 6, ["RAIL"], budget=0.0)
    assert main(["pipeline", "--config", str(path)]) == 2


def test_cli_console_script_help():
    import subprocess
    import sys
    r = subprocess.run([sys.executable, "-m", "mmtransit.pipeline.cli", "--help"],
                       capture_output=True, text=True)
    assert r.returncode == 0
    for verb in ("cluster", "links", "costs", "optimize", "routes", "report", "pipeline"):
        assert verb in r.stdout


# -------------------------------------------------------------------- report
def _table2(path):
    rows = {}
    for line in path.read_text().splitlines()[1:]:
        name, unit, value = line.split("\t")
        rows[name] = None if value == "/" else float(value)
    return rows


def test_report_matches_recomputed_metrics(finished):
    out = finished.out_dir
    zones, demand = zones_from_doc(read_json(out / "zones.json"))
    sol = solution_from_doc(read_json(out / "solution.json"),
                            costs_from_doc(read_json(out / "costs.json")), demand,
                            links_from_doc(read_json(out / "links.json")),
                            finished.profile.modes, finished.profile.globals)
    m = summarize(sol)
    t2 = _table2(out / "table2.tsv")
    assert t2["Average journey time"] == m.journey_time
    assert t2["Average generalized cost"] == m.generalized_cost
    assert t2["Objective"] == sol.objective
    for x in MODES:
        assert t2[f"Modal split by trip count: {x}"] == m.split_trips[x]
    assert sum(m.split_trips.values()) == pytest.approx(100.0)
    assert sum(m.split_distance.values()) == pytest.approx(100.0)
    stored = read_json(out / "solution.json")["metrics"]
    assert stored["journey_time"] == m.journey_time


def test_report_single_mode_and_hidden_averages(tmp_path):
    from mmtransit.zonal import solve_zonal
    inst = line_instance([[0, 50, 20], [10, 0, 30], [5, 5, 0]], ["LBUS"])
    sol = solve_zonal(inst.build())
    rows = {r[0]: r[2] for r in table2_rows(ReportBundle(sol, {}, ["LBUS", "SAV"]))}
    assert rows["Modal split by trip count: LBUS"] == pytest.approx(100.0)
    assert rows["Modal split by trip count: SAV"] == 0.0
    assert rows["Average trip distance: SAV"] is None
    assert rows["Average trip distance: LBUS"] is not None


def test_report_empty_route_plan():
    assert table3_rows({"modes": {}}) == [("-", "Routes", 0, 0, None)]


def test_table2_has_every_row_name(finished):
    names = set(_table2(finished.out_dir / "table2.tsv"))
    for row in ("Computation time", "Objective", "Lower Bound", "Solution gap",
                "Number of variables: Continuous", "Number of variables: Integer",
                "Average generalized cost", "Average journey time", "Average start time",
                "Average interzonal travel time", "Average end time",
                "Average number of intermodal transfers", "Average operating cost",
                "Average emissions cost"):
        assert row in names


# ------------------------------------------------------------ budget sweeps
def test_budget_sweep_and_zero_budget(tmp_path):
    city = synthetic_city(10, 4, 45, seed=7)
    path = write_scenario_files(city, tmp_path, 10, ["BRT", "LBUS", "SAV"], budget=0.0, gap=0.0)
    base = load_config(path)
    objs = []
    for n, b in enumerate((0.0, 4e7, 4e8)):
        cfg = base.with_overrides(budget=b, out=str(tmp_path / f"b{n}"))
        run_scenario(cfg)
        doc = read_json(cfg.out_dir / "solution.json")
        objs.append(doc["objective"])
        if b == 0.0:
            assert doc["metrics"]["split_trips"]["BRT"] == 0.0
            t2 = _table2(cfg.out_dir / "table2.tsv")
            assert t2["Average trip distance: BRT"] is None
    assert objs[0] >= objs[1] - 1e-6 * abs(objs[1])
    assert objs[1] >= objs[2] - 1e-6 * abs(objs[2])
    assert objs[2] < objs[0]
