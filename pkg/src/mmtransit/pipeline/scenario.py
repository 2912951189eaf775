"""Stage-by-stage scenario runs that pass files between stages.

Stages and the files they write to the output directory:

========  ====================================================
cluster   ``zones.json``, ``zones.geojson``
links     ``links.json``
costs     ``costs.json``
optimize  ``solution.json``, ``network_<MODE>.geojson``
routes    ``routes.json``, ``routes.geojson``
report    ``table2.tsv``, ``table3.tsv``, ``origin_splits.tsv``, ``report.txt``
========  ====================================================

Each stage reads only the files of earlier stages. ``manifest.json``
records per-stage wall time, the hash of every output and which outputs
are stale because an upstream stage failed or was re-run after them.
"""
from __future__ import annotations

import logging
import platform
import sys
import time
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Callable, Dict, List, Optional

from .. import __version__
from ..costs import build_cost_tables
from ..params import ConfigError
from ..routes import ModeRouting, generate_routes, mode_flows
from ..zonal import (build_zonal_model, disaggregate_od_flows, solve_zonal, summarize,
                     validate_zonal)
from ..zoning import (aggregate_demand, clear_distances, cluster_zones, derive_zone_geometry,
                      generate_candidate_links)
from . import documents as docs
from .config import ScenarioConfig
from .io import (maz_trip_totals, read_city_boundary, read_json, read_lines, read_mazs, read_od,
                 sha256_file, write_json)
from .network import import_existing_network
from .report import ReportBundle, emit_report

log = logging.getLogger(__name__)

STAGES = ("cluster", "links", "costs", "optimize", "routes", "report")
MANIFEST = "manifest.json"


class StageError(RuntimeError):
    """A stage failed; ``cause`` holds the original exception."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")


# ------------------------------------------------------------------- stages
def stage_cluster(cfg: ScenarioConfig) -> Dict[str, Path]:
    out = cfg.out_dir
    od = read_od(cfg.od_path, cfg.trips_scale)
    mazs = maz_trip_totals(read_mazs(cfg.mazs_path), od)
    city = read_city_boundary(cfg.city_path) if cfg.city_path else None
    part = cluster_zones(mazs, cfg.k, rng_seed=cfg.rng_seed)
    zones = derive_zone_geometry(part, city)
    positions = {m.id: (m.x, m.y) for m in mazs}
    demand = aggregate_demand(od, part, cfg.peripheral_rule, positions)
    if demand.dropped_intrazonal > 0:
        log.info("dropped %.6g intrazonal trips", demand.dropped_intrazonal)
    return {
        "zones.json": write_json(out / "zones.json",
                                 docs.zones_doc(zones, demand, part.objective, cfg.describe())),
        "zones.geojson": write_json(out / "zones.geojson", docs.zones_geojson(zones, demand)),
    }


def stage_links(cfg: ScenarioConfig) -> Dict[str, Path]:
    zones, demand = docs.zones_from_doc(read_json(cfg.out_dir / "zones.json"))
    existing = {}
    if cfg.existing_path:
        existing = import_existing_network(read_lines(cfg.existing_path), zones,
                                           cfg.profile.modes)
    g = cfg.profile.globals
    links = generate_candidate_links(zones, demand, existing, g.n_adj, g.n_direct,
                                     cfg.profile.modes)
    return {"links.json": write_json(cfg.out_dir / "links.json",
                                     docs.links_doc(links, cfg.describe()))}


def stage_costs(cfg: ScenarioConfig) -> Dict[str, Path]:
    zones, _ = docs.zones_from_doc(read_json(cfg.out_dir / "zones.json"))
    links = docs.links_from_doc(read_json(cfg.out_dir / "links.json"))
    und = sorted({p for m in links.pairs for p in links.undirected(m)})
    costs = build_cost_tables(zones, cfg.profile.modes, links.pairs, cfg.profile.globals,
                              clear_distances(zones, und))
    return {"costs.json": write_json(cfg.out_dir / "costs.json",
                                     docs.costs_doc(costs, cfg.describe()))}


def _load_solution(cfg: ScenarioConfig):
    zones, demand = docs.zones_from_doc(read_json(cfg.out_dir / "zones.json"))
    links = docs.links_from_doc(read_json(cfg.out_dir / "links.json"))
    costs = docs.costs_from_doc(read_json(cfg.out_dir / "costs.json"))
    sdoc = read_json(cfg.out_dir / "solution.json")
    sol = docs.solution_from_doc(sdoc, costs, demand, links, cfg.profile.modes,
                                 cfg.profile.globals, cfg.zonal_options())
    return zones, sol, sdoc


def stage_optimize(cfg: ScenarioConfig) -> Dict[str, Path]:
    out = cfg.out_dir
    zones, demand = docs.zones_from_doc(read_json(out / "zones.json"))
    links = docs.links_from_doc(read_json(out / "links.json"))
    costs = docs.costs_from_doc(read_json(out / "costs.json"))
    if costs.modes != cfg.modes:
        raise ConfigError(f"costs.json covers modes {costs.modes}, config has {cfg.modes}; "
                          "re-run the costs stage")
    zm = build_zonal_model(costs, demand, cfg.profile.modes, cfg.profile.globals, links,
                           cfg.zonal_options())
    sol = solve_zonal(zm, rel_gap=cfg.gap, time_limit=cfg.time_limit, solver=cfg.solver)
    rep = validate_zonal(sol)
    if not rep.ok:
        log.warning("solution violates %d constraints, first: %s", len(rep), rep.violations[0])
    paths = [disaggregate_od_flows(sol, demand, o) for o in range(demand.n)
             if demand.matrix[o].sum() > 0]
    sdoc = docs.solution_doc(sol, paths, summarize(sol), cfg.describe())
    sdoc["validation"] = [str(v) for v in rep.violations]
    files = {"solution.json": write_json(out / "solution.json", sdoc)}
    for m in cfg.modes:
        name = f"network_{m}.geojson"
        files[name] = write_json(out / name, docs.network_geojson(sol, zones, m))
    return files


def stage_routes(cfg: ScenarioConfig) -> Dict[str, Path]:
    out = cfg.out_dir
    zones, sol, sdoc = _load_solution(cfg)
    paths = docs.paths_from_doc(sdoc)
    costs = sol.context.costs
    results: Dict[str, ModeRouting] = {}
    flows = {}
    for spec in cfg.profile.modes:
        if not spec.is_transit:
            continue
        mf = mode_flows(paths, spec.name)
        if not mf.runs:
            continue
        lengths = {(i, j): d for (m, i, j), d in costs.link_dist.items() if m == spec.name}
        flows[spec.name] = mf
        results[spec.name] = generate_routes(mf, spec, lengths, cfg.bidirectional_routes,
                                             time_limit=cfg.time_limit)
    rdoc = docs.routes_doc(results, flows, cfg.describe())
    return {"routes.json": write_json(out / "routes.json", rdoc),
            "routes.geojson": write_json(out / "routes.geojson",
                                         docs.routes_geojson(rdoc, zones))}


def stage_report(cfg: ScenarioConfig) -> Dict[str, Path]:
    _, sol, sdoc = _load_solution(cfg)
    rdoc = read_json(cfg.out_dir / "routes.json")
    man = read_manifest(cfg.out_dir)
    secs = man.get("stages", {}).get("optimize", {}).get("wall_time")
    bundle = ReportBundle(sol, rdoc, cfg.modes,
                          compute_hours=None if secs is None else secs / 3600.0,
                          settings={"n_integer": sdoc["n_integer"],
                                    "n_continuous": sdoc["n_continuous"]})
    return emit_report(bundle, cfg.out_dir)


STAGE_FUNCS: Dict[str, Callable[[ScenarioConfig], Dict[str, Path]]] = {
    "cluster": stage_cluster, "links": stage_links, "costs": stage_costs,
    "optimize": stage_optimize, "routes": stage_routes, "report": stage_report,
}


# ----------------------------------------------------------------- manifest
def _versions() -> Dict[str, str]:
    out = {"python": platform.python_version(), "mmtransit": __version__}
    for pkg in ("numpy", "scipy", "shapely", "highspy"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = "missing"
    return out


def read_manifest(out_dir) -> dict:
    p = Path(out_dir) / MANIFEST
    if not p.is_file():
        return {}
    try:
        return read_json(p)
    except ValueError:
        return {}


def _update_manifest(cfg: ScenarioConfig, stage: str, files: Dict[str, Path],
                     wall: float, error: Optional[BaseException] = None) -> dict:
    man = read_manifest(cfg.out_dir) or {"format": 1, "stages": {}, "files": {}}
    man["versions"] = _versions()
    man["platform"] = sys.platform
    man["config"] = str(cfg.source) if cfg.source else None
    man["settings"] = cfg.describe()
    man["seed"] = cfg.rng_seed
    downstream = STAGES[STAGES.index(stage) + 1:]
    if error is None:
        man["stages"][stage] = {"status": "ok", "wall_time": wall}
        for name, path in sorted(files.items()):
            man["files"][name] = {"sha256": sha256_file(path), "stage": stage, "stale": False}
        stale_from = downstream
    else:
        man["stages"][stage] = {"status": "failed", "wall_time": wall,
                                "error": f"{type(error).__name__}: {error}"}
        stale_from = (stage,) + downstream
    for name, entry in man["files"].items():
        if entry["stage"] in stale_from:
            entry["stale"] = True
    for s in downstream:
        if s in man["stages"] and man["stages"][s]["status"] == "ok":
            man["stages"][s]["status"] = "stale"
    if stage == "optimize" and error is None:
        sdoc = read_json(cfg.out_dir / "solution.json")
        man["solver"] = {"name": cfg.solver, "requested_gap": cfg.gap, "gap": sdoc["gap"],
                         "status": sdoc["status"], "objective": sdoc["objective"],
                         "bound": sdoc["bound"]}
    ok = all(man["stages"].get(s, {}).get("status") == "ok" for s in STAGES)
    man["status"] = "complete" if ok else ("failed" if error is not None else "partial")
    write_json(cfg.out_dir / MANIFEST, man)
    return man


def run_stage(cfg: ScenarioConfig, stage: str) -> Dict[str, Path]:
    """Run one stage, record it in the manifest and re-raise failures as StageError."""
    if stage not in STAGE_FUNCS:
        raise ValueError(f"unknown stage {stage!r}")
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        files = STAGE_FUNCS[stage](cfg)
    except Exception as exc:
        _update_manifest(cfg, stage, {}, time.perf_counter() - t0, exc)
        raise StageError(stage, exc) from exc
    wall = time.perf_counter() - t0
    log.info("stage %s done in %.2f s", stage, wall)
    _update_manifest(cfg, stage, files, wall)
    return files


@dataclass
class ScenarioResult:
    out_dir: Path
    files: Dict[str, Path] = field(default_factory=dict)
    manifest: dict = field(default_factory=dict)

    def solution(self) -> dict:
        return read_json(self.out_dir / "solution.json")


def run_scenario(cfg: ScenarioConfig, stages: Optional[List[str]] = None) -> ScenarioResult:
    """Run the given stages (all by default) in order.

    Raises
    ------
    StageError
        From the first failing stage; later stages do not run and their
        earlier outputs are flagged stale in the manifest.
    """
    res = ScenarioResult(cfg.out_dir)
    for stage in stages or STAGES:
        res.files.update(run_stage(cfg, stage))
    total = sum(v["wall_time"] for v in read_manifest(cfg.out_dir)["stages"].values())
    man = read_manifest(cfg.out_dir)
    man["wall_time"] = total
    write_json(cfg.out_dir / MANIFEST, man)
    res.manifest = man
    return res
