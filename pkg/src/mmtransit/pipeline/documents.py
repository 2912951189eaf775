"""JSON documents passed between pipeline stages, and GeoJSON views of them.

Tuple-keyed dictionaries are stored as sorted lists of rows so that the
text of a document depends only on its content.
"""
from __future__ import annotations

import math
from typing import Dict, List, Optional, Sequence

import numpy as np
from shapely.geometry import LineString, Polygon, mapping

from ..costs import CostTables
from ..milp import MilpModel, Status
from ..params import ConfigError, GlobalParams, ModeSpec
from ..routes import ModeFlows, ModeRouting, RoutePlan
from ..zonal import (OdPathFlows, ScenarioMetrics, ValidationReport, ZonalModel, ZonalOptions,
                     ZonalSolution)
from ..zoning import CandidateLinkSet, DemandMatrix, Zone

FORMAT = 1


def _check(doc: dict, kind: str) -> dict:
    if doc.get("kind") != kind or doc.get("format") != FORMAT:
        raise ConfigError(f"expected a {kind!r} document (format {FORMAT})")
    return doc


def _f(v) -> float:
    return math.nan if v is None else float(v)


def _rows(d: Dict[tuple, float], skip_zero: bool = True) -> List[list]:
    return [list(k) + [v] for k, v in sorted(d.items()) if not (skip_zero and v == 0)]


def _unrows(rows, cast=float) -> Dict[tuple, float]:
    return {tuple(r[:-1]): cast(r[-1]) for r in rows}


# -------------------------------------------------------------------- zones
def zones_doc(zones: Sequence[Zone], demand: DemandMatrix, objective: float,
              settings: dict) -> dict:
    return {
        "kind": "zones", "format": FORMAT, "settings": settings,
        "clustering_objective": objective,
        "zones": [{"id": z.id, "centroid": list(z.centroid), "length": z.length,
                   "is_city": z.is_city, "members": [str(m) for m in z.members],
                   "cell": [list(map(float, p)) for p in z.cell.exterior.coords]
                   if z.cell is not None else None} for z in zones],
        "demand": {"matrix": demand.matrix.tolist(),
                   "dropped_intrazonal": demand.dropped_intrazonal,
                   "remapped": demand.remapped, "total_input": demand.total_input},
    }


def zones_from_doc(doc: dict):
    _check(doc, "zones")
    zones = [Zone(int(z["id"]), tuple(z["centroid"]), float(z["length"]), bool(z["is_city"]),
                  list(z["members"]), Polygon(z["cell"]) if z["cell"] else None)
             for z in doc["zones"]]
    d = doc["demand"]
    demand = DemandMatrix(np.array(d["matrix"], dtype=float).reshape(len(zones), len(zones)),
                          float(d["dropped_intrazonal"]), float(d["remapped"]),
                          float(d["total_input"]))
    return zones, demand


def zones_geojson(zones: Sequence[Zone], demand: DemandMatrix) -> dict:
    E = demand.matrix
    feats = []
    for z in zones:
        props = {"zone": z.id, "centroid_x": z.centroid[0], "centroid_y": z.centroid[1],
                 "length_km": z.length, "is_city": z.is_city, "n_mazs": len(z.members),
                 "trips_out": float(E[z.id].sum()), "trips_in": float(E[:, z.id].sum())}
        feats.append({"type": "Feature", "geometry": mapping(z.cell) if z.cell else None,
                      "properties": props})
    return {"type": "FeatureCollection", "features": feats}


# -------------------------------------------------------------------- links
def links_doc(links: CandidateLinkSet, settings: dict) -> dict:
    return {"kind": "links", "format": FORMAT, "settings": settings,
            "pairs": {m: [list(p) for p in ps] for m, ps in sorted(links.pairs.items())},
            "existing": {m: _rows(ex) for m, ex in sorted(links.existing.items())}}


def links_from_doc(doc: dict) -> CandidateLinkSet:
    _check(doc, "links")
    return CandidateLinkSet(
        {m: [tuple(p) for p in ps] for m, ps in doc["pairs"].items()},
        {m: _unrows(rows, int) for m, rows in doc["existing"].items()})


# -------------------------------------------------------------------- costs
_ARRAYS = ("start", "end", "eta", "feeder_dist", "feeder_time", "through", "feeder_op",
           "transfer")
_LINKS = ("link_dist", "link_time", "link_clear_time")


def costs_doc(costs: CostTables, settings: dict) -> dict:
    doc = {"kind": "costs", "format": FORMAT, "settings": settings,
           "modes": list(costs.modes), "n_zones": costs.n_zones}
    for name in _ARRAYS:
        a = getattr(costs, name)
        doc[name] = [[None if math.isnan(v) else float(v) for v in row] for row in a]
    for name in _LINKS:
        doc[name] = _rows(getattr(costs, name), skip_zero=False)
    doc["clear_dist"] = _rows(costs.clear_dist, skip_zero=False)
    return doc


def costs_from_doc(doc: dict) -> CostTables:
    _check(doc, "costs")
    arrays = {n: np.array([[_f(v) for v in row] for row in doc[n]], dtype=float)
              for n in _ARRAYS}
    out = CostTables(tuple(doc["modes"]), int(doc["n_zones"]), **arrays)
    for n in _LINKS:
        setattr(out, n, _unrows(doc[n]))
    out.clear_dist = _unrows(doc["clear_dist"])
    return out


# ----------------------------------------------------------------- solution
def _metrics_dict(m: ScenarioMetrics) -> dict:
    return {k: (dict(sorted(v.items())) if isinstance(v, dict) else v)
            for k, v in vars(m).items()}


def solution_doc(sol: ZonalSolution, paths: Sequence[OdPathFlows], metrics: ScenarioMetrics,
                 settings: dict) -> dict:
    zm = sol.context
    cap = sol.capacity_report
    return {
        "kind": "solution", "format": FORMAT, "settings": settings,
        "status": sol.status.value, "objective": sol.objective, "bound": sol.bound,
        "gap": sol.gap, "nodes": sol.nodes, "root_bound": sol.root_bound,
        "n_continuous": zm.model.n_vars - zm.n_integer,
        "n_integer": zm.n_integer, "n_constraints": zm.model.n_cons,
        "fa": _rows(sol.fa), "fb": _rows(sol.fb), "fl": _rows(sol.fl), "fx": _rows(sol.fx),
        "xl": _rows({k: v for k, v in sol.xl.items() if k[1] < k[2]}),
        "xw": _rows({k: v for k, v in sol.xw.items() if k[1] < k[2]}),
        "xp": _rows(sol.xp),
        "paths": {str(p.origin): {str(d): [[[list(t) for t in arcs], f] for arcs, f in fl]
                                  for d, fl in sorted(p.paths.items())} for p in paths},
        "metrics": _metrics_dict(metrics),
        "capacity_check": None if cap is None else [str(v) for v in cap.violations],
    }


def solution_from_doc(doc: dict, costs: CostTables, demand: DemandMatrix,
                      links: CandidateLinkSet, modes: Sequence[ModeSpec], g: GlobalParams,
                      opts: Optional[ZonalOptions] = None) -> ZonalSolution:
    """Rebuild a solution with a model-free context, enough for metrics."""
    _check(doc, "solution")
    opts = opts or ZonalOptions()
    zm = ZonalModel(MilpModel(), tuple(modes), costs, demand, links, g, opts,
                    opts.budget or 0.0)
    xl, xw = {}, {}
    for (m, a, b), v in _unrows(doc["xl"], int).items():
        xl[(m, a, b)] = xl[(m, b, a)] = v
    for (m, a, b), v in _unrows(doc["xw"], int).items():
        xw[(m, a, b)] = xw[(m, b, a)] = v
    cap = None
    if doc.get("capacity_check") is not None:
        cap = ValidationReport(notes=list(doc["capacity_check"]))
    return ZonalSolution(Status(doc["status"]), _f(doc["objective"]), _f(doc["bound"]),
                         _f(doc["gap"]), int(doc["nodes"]), _f(doc["root_bound"]),
                         _unrows(doc["fa"]), _unrows(doc["fb"]), _unrows(doc["fl"]),
                         _unrows(doc["fx"]), xl, xw, _unrows(doc["xp"], int), zm, None, cap)


def paths_from_doc(doc: dict) -> List[OdPathFlows]:
    out = []
    for o in sorted(doc["paths"], key=int):
        pf = OdPathFlows(int(o))
        for d, plist in doc["paths"][o].items():
            pf.paths[int(d)] = [(tuple(tuple(t) for t in arcs), float(f)) for arcs, f in plist]
        out.append(pf)
    return out


def network_geojson(sol: ZonalSolution, zones: Sequence[Zone], mode: str) -> dict:
    """Links of one mode carrying flow or holding built links."""
    flow = sol.link_flow(mode)
    feats = []
    pairs = sorted({(min(i, j), max(i, j)) for (i, j), v in flow.items() if v > 1e-9}
                   | {(a, b) for (m, a, b), v in sol.xl.items() if m == mode and a < b and v})
    for a, b in pairs:
        geom = LineString([zones[a].centroid, zones[b].centroid])
        props = {"mode": mode, "from": a, "to": b, "flow_ab": flow.get((a, b), 0.0),
                 "flow_ba": flow.get((b, a), 0.0),
                 "flow": flow.get((a, b), 0.0) + flow.get((b, a), 0.0),
                 "links": sol.xl.get((mode, a, b)), "built": sol.xw.get((mode, a, b))}
        feats.append({"type": "Feature", "geometry": mapping(geom), "properties": props})
    return {"type": "FeatureCollection", "features": feats}


# ------------------------------------------------------------------- routes
def _plan_dict(plan: RoutePlan) -> dict:
    return {"count": plan.count, "transfers": plan.transfers, "trips": plan.trips,
            "avg_length": plan.avg_length,
            "connections": sorted([[c[0]] + [list(u) for u in c[1:]] for c in plan.connections]),
            "routes": [{"zones": list(r.zones), "segments": [list(u) for u in r.segments],
                        "length": r.length, "trips": r.trips} for r in plan.routes]}


def routes_doc(results: Dict[str, ModeRouting], flows: Dict[str, ModeFlows],
               settings: dict) -> dict:
    modes = {}
    for name in sorted(results):
        res = results[name]
        rs = res.solution
        modes[name] = {
            "trips": flows[name].trips(),
            "segments": [[a, b, n] for (a, b), n in sorted(res.net.counts.items())],
            "milp": dict(_plan_dict(res.plan), status=rs.status.value, objective=rs.objective,
                         gap=rs.gap, nodes=rs.nodes),
            "myopic": _plan_dict(res.myopic),
        }
    return {"kind": "routes", "format": FORMAT, "settings": settings, "modes": modes}


def routes_geojson(doc: dict, zones: Sequence[Zone]) -> dict:
    feats = []
    for mode, entry in sorted(doc["modes"].items()):
        for variant in ("milp", "myopic"):
            for n, r in enumerate(entry[variant]["routes"]):
                geom = LineString([zones[z].centroid for z in r["zones"]])
                feats.append({"type": "Feature", "geometry": mapping(geom),
                              "properties": {"mode": mode, "variant": variant, "route": n,
                                             "zones": r["zones"], "length_km": r["length"],
                                             "flow": r["trips"]}})
    return {"type": "FeatureCollection", "features": feats}
