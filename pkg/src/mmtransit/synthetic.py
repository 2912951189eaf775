"""Seeded synthetic cities and zonal instances for tests and demos."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from shapely.geometry import Point, box, mapping

from .costs import CostTables, build_cost_tables
from .params import Profile, default_profile
from .zonal import ZonalModel, ZonalOptions, build_zonal_model
from .zoning import CandidateLinkSet, DemandMatrix, Maz, Zone, clear_distances


@dataclass
class SyntheticCity:
    """MAZ-level inputs: positions, O-D trips, a city polygon and rail lines."""

    mazs: List[Maz]
    od: List[Tuple[str, str, float]]
    city_boundary: object
    lines: Dict[str, List[List[Tuple[float, float]]]] = field(default_factory=dict)
    centers: Optional[np.ndarray] = None


def synthetic_city(n_zones: int = 20, mazs_per_zone: int = 6, n_od: int = 200, seed: int = 0,
                   extent: float = 40.0, spread: float = 0.8, trips=(20, 200),
                   lines: Optional[Dict[str, int]] = None) -> SyntheticCity:
    """Tight MAZ clusters on a jittered grid with trips between cluster pairs.

    Clusters are far apart relative to ``spread`` so that clustering into
    ``n_zones`` zones recovers them, which keeps the number of zone-level
    O-D pairs equal to ``n_od``.

    Parameters
    ----------
    lines : dict, optional
        ``mode -> count`` of straight existing lines to draw between random
        cluster centres.
    """
    rng = np.random.default_rng(seed)
    side = int(np.ceil(np.sqrt(n_zones)))
    step = extent / side
    cells = [(a, b) for b in range(side) for a in range(side)][:n_zones]
    centers = np.array([((a + 0.5) * step, (b + 0.5) * step) for a, b in cells])
    centers += rng.uniform(-0.15, 0.15, centers.shape) * step
    mazs = []
    for z, c in enumerate(centers):
        for k in range(mazs_per_zone):
            p = c + rng.normal(0.0, spread, 2)
            mazs.append(Maz(f"m{z:03d}_{k}", float(p[0]), float(p[1]), 0.0))
    pairs = [(o, d) for o in range(n_zones) for d in range(n_zones) if o != d]
    if n_od > len(pairs):
        raise ValueError(f"at most {len(pairs)} O-D pairs for {n_zones} zones")
    pick = rng.choice(len(pairs), size=n_od, replace=False)
    od = []
    load = np.zeros(len(mazs))
    for p in sorted(pick):
        o, d = pairs[p]
        t = float(rng.integers(trips[0], trips[1] + 1))
        a = o * mazs_per_zone + int(rng.integers(mazs_per_zone))
        b = d * mazs_per_zone + int(rng.integers(mazs_per_zone))
        od.append((mazs[a].id, mazs[b].id, t))
        load[a] += t
        load[b] += t
    mazs = [Maz(m.id, m.x, m.y, float(w)) for m, w in zip(mazs, load)]
    mid = extent / 2
    city = Point(mid, mid).buffer(extent / 4, quad_segs=16)
    out_lines: Dict[str, List] = {}
    for mode, count in sorted((lines or {}).items()):
        out_lines[mode] = []
        for _ in range(count):
            a, b = rng.choice(n_zones, size=2, replace=False)
            out_lines[mode].append([tuple(map(float, centers[a])), tuple(map(float, centers[b]))])
    return SyntheticCity(mazs, od, city, out_lines, centers)


@dataclass
class ZonalInstance:
    zones: List[Zone]
    demand: DemandMatrix
    links: CandidateLinkSet
    costs: CostTables
    profile: Profile

    def build(self, opts: Optional[ZonalOptions] = None) -> ZonalModel:
        return build_zonal_model(self.costs, self.demand, self.profile.modes,
                                 self.profile.globals, self.links, opts)

    def with_links(self, pairs: Sequence[Tuple[int, int]]) -> "ZonalInstance":
        """Same instance restricted to the given undirected pairs."""
        keep = {(min(i, j), max(i, j)) for i, j in pairs}
        links = CandidateLinkSet(
            {m: [p for p in ps if (min(p), max(p)) in keep] for m, ps in self.links.pairs.items()},
            {m: {p: c for p, c in ex.items() if (min(p), max(p)) in keep}
             for m, ex in self.links.existing.items()})
        return ZonalInstance(self.zones, self.demand, links, self.costs, self.profile)


def grid_zones(nx: int, ny: int, spacing: float = 3.0, city_radius: Optional[float] = None
               ) -> List[Zone]:
    """Square zones on a grid; a square of side ``s`` has length ``s / 3``."""
    zones = []
    cx, cy = nx * spacing / 2, ny * spacing / 2
    r = city_radius if city_radius is not None else 0.3 * max(nx, ny) * spacing
    for b in range(ny):
        for a in range(nx):
            x0, y0 = a * spacing, b * spacing
            c = (x0 + spacing / 2, y0 + spacing / 2)
            is_city = (c[0] - cx) ** 2 + (c[1] - cy) ** 2 <= r * r
            zones.append(Zone(len(zones), c, spacing / 3.0, bool(is_city), [len(zones)],
                              box(x0, y0, x0 + spacing, y0 + spacing)))
    return zones


def random_zonal_instance(n_zones: int, modes: Sequence[str], seed: int = 0,
                          density: float = 0.5, trips=(10, 200), spacing: float = 3.0,
                          existing: Optional[Dict[str, Dict[Tuple[int, int], int]]] = None,
                          profile: Optional[Profile] = None, complete: bool = True,
                          globals_changes: Optional[dict] = None) -> ZonalInstance:
    """Random demand on grid zones with every zone pair (or grid neighbours) as links.

    Parameters
    ----------
    density : float
        Probability that an ordered zone pair carries demand. At least one
        pair always does.
    existing : dict, optional
        ``mode -> {(i, j): count}`` pre-built links of infrastructure modes.
    complete : bool
        Link every zone pair; otherwise only grid neighbours (8-connected).
    """
    rng = np.random.default_rng(seed)
    prof = (profile or default_profile()).select(list(modes))
    if globals_changes:
        prof = prof.replace_globals(**globals_changes)
    nx = int(np.ceil(np.sqrt(n_zones)))
    ny = int(np.ceil(n_zones / nx))
    zones = grid_zones(nx, ny, spacing)[:n_zones]
    E = np.where(rng.random((n_zones, n_zones)) < density,
                 rng.integers(trips[0], trips[1] + 1, (n_zones, n_zones)), 0).astype(float)
    np.fill_diagonal(E, 0.0)
    if E.sum() == 0 and n_zones > 1:
        E[0, 1] = float(trips[0])
    demand = DemandMatrix(E, total_input=float(E.sum()))
    if complete:
        und = [(i, j) for i in range(n_zones) for j in range(i + 1, n_zones)]
    else:
        und = [(i, j) for i in range(n_zones) for j in range(i + 1, n_zones)
               if max(abs(zones[i].centroid[0] - zones[j].centroid[0]),
                      abs(zones[i].centroid[1] - zones[j].centroid[1])) <= spacing * 1.01]
    ordered = sorted(und + [(j, i) for i, j in und])
    existing = existing or {}
    ex = {}
    for m in prof.modes:
        e = {}
        if m.is_infrastructure:
            for (i, j), c in existing.get(m.name, {}).items():
                e[(i, j)] = e[(j, i)] = int(c)
        ex[m.name] = e
    links = CandidateLinkSet({m.name: list(ordered) for m in prof.modes}, ex)
    clear = clear_distances(zones, und)
    costs = build_cost_tables(zones, prof.modes, links.pairs, prof.globals, clear)
    return ZonalInstance(zones, demand, links, costs, prof)


def write_scenario_files(city: SyntheticCity, directory, k: int, modes: Sequence[str],
                         budget: float = 0.0, seed: int = 0, gap: float = 0.01,
                         time_limit: Optional[float] = None, options: Optional[dict] = None,
                         out: str = "out") -> Path:
    """Write a synthetic city as pipeline inputs plus a scenario file.

    Returns the path of the scenario file.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    with (d / "mazs.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "x_km", "y_km", "trips"])
        for m in city.mazs:
            w.writerow([m.id, repr(m.x), repr(m.y), repr(m.trips)])
    with (d / "od.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["origin_id", "dest_id", "trips"])
        for o, t, n in city.od:
            w.writerow([o, t, repr(n)])
    fc = {"type": "FeatureCollection",
          "features": [{"type": "Feature", "geometry": mapping(city.city_boundary),
                        "properties": {"name": "city"}}]}
    (d / "city.geojson").write_text(json.dumps(fc))
    lines = ["[scenario]", f"k = {int(k)}", f"seed = {int(seed)}", f"budget = {float(budget)!r}",
             "modes = [" + ", ".join(f'"{m}"' for m in modes) + "]", "",
             "[solver]", f"gap = {float(gap)!r}"]
    if time_limit is not None:
        lines.append(f"time_limit = {float(time_limit)!r}")
    lines += ["", "[inputs]", 'mazs = "mazs.csv"', 'od = "od.csv"', 'city = "city.geojson"']
    if city.lines:
        feats = [{"type": "Feature", "properties": {"mode": mode},
                  "geometry": {"type": "LineString", "coordinates": [list(p) for p in pl]}}
                 for mode, pls in sorted(city.lines.items()) for pl in pls]
        (d / "existing.geojson").write_text(json.dumps({"type": "FeatureCollection",
                                                        "features": feats}))
        lines.append('existing = "existing.geojson"')
    if options:
        lines += ["", "[options]"] + [f"{key} = {str(v).lower()}" for key, v in options.items()]
    lines += ["", "[output]", f'dir = "{out}"', ""]
    path = d / "scenario.toml"
    path.write_text("\n".join(lines))
    return path
