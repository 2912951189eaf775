"""Demand zoning: weighted k-means, Voronoi geometry, demand and candidate links.

Micro analysis zones (MAZs) are points carrying a trip count. They are
clustered with k-means in which each point weighs ``trips**2``, so that
busy MAZs pull centroids harder than their plain trip share would. Each
cluster centroid then owns its Voronoi cell, clipped to the MAZ bounding
box inflated by 10%.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import shapely
from shapely.geometry import Point, Polygon, box
from shapely.geometry.base import BaseGeometry

N_RESTARTS = 20
MAX_LLOYD = 300
BOX_INFLATE = 0.10
PERTURB = 1e-9


class ZoningError(ValueError):
    """Input that cannot be clustered or mapped to zones."""


@dataclass(frozen=True)
class Maz:
    id: object
    x: float
    y: float
    trips: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ZoningError(f"MAZ {self.id}: non-finite position")
        if not self.trips >= 0:
            raise ZoningError(f"MAZ {self.id}: trips must be non-negative")


@dataclass
class ZonePartition:
    """Cluster labels for a list of MAZs plus the clustering objective."""

    maz_ids: List[object]
    positions: np.ndarray
    trips: np.ndarray
    labels: np.ndarray
    centroids: np.ndarray
    objective: float

    @property
    def k(self) -> int:
        return len(self.centroids)

    def members(self, zone: int) -> List[object]:
        return [self.maz_ids[a] for a in np.flatnonzero(self.labels == zone)]

    def zone_of(self) -> Dict[object, int]:
        return {mid: int(z) for mid, z in zip(self.maz_ids, self.labels)}


@dataclass
class Zone:
    id: int
    centroid: Tuple[float, float]
    length: float
    is_city: bool
    members: List[object]
    cell: Optional[BaseGeometry] = None

    @property
    def area(self) -> float:
        return float(self.cell.area) if self.cell is not None else 0.0


# ----------------------------------------------------------------- k-means
def weighted_objective(X: np.ndarray, w: np.ndarray, labels: np.ndarray,
                       centroids: np.ndarray) -> float:
    d = X - centroids[labels]
    return float(np.sum(w * np.einsum("ij,ij->i", d, d)))


def _centroids(X, w, labels, k):
    C = np.zeros((k, X.shape[1]))
    for c in range(k):
        sel = labels == c
        ws = w[sel].sum()
        C[c] = (w[sel] @ X[sel]) / ws if ws > 0 else X[sel].mean(axis=0)
    return C


def _plusplus(X, w, k, rng):
    """Weighted k-means++ seeding over distinct positions."""
    n = len(X)
    p = w / w.sum() if w.sum() > 0 else np.full(n, 1.0 / n)
    chosen = [int(rng.choice(n, p=p))]
    d2 = np.sum((X - X[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        score = w * d2
        if score.sum() <= 0:
            score = d2.copy()
        if score.sum() <= 0:
            break
        nxt = int(rng.choice(n, p=score / score.sum()))
        chosen.append(nxt)
        d2 = np.minimum(d2, np.sum((X - X[nxt]) ** 2, axis=1))
    return X[chosen].copy()


def _assign(X, C):
    d2 = np.sum((X[:, None, :] - C[None, :, :]) ** 2, axis=2)
    return np.argmin(d2, axis=1), d2


def _fill_empty(X, w, labels, C, k):
    """Give every empty cluster the point that costs most where it sits."""
    for c in range(k):
        if np.any(labels == c):
            continue
        cost = np.sum((X - C[labels]) ** 2, axis=1) * np.maximum(w, 1e-300)
        counts = np.bincount(labels, minlength=k)
        cost[counts[labels] <= 1] = -1.0
        a = int(np.argmax(cost))
        labels[a] = c
        C[c] = X[a]
    return labels


def _lloyd(X, w, C, k):
    labels = None
    for _ in range(MAX_LLOYD):
        new, _ = _assign(X, C)
        new = _fill_empty(X, w, new, C, k)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        C = _centroids(X, w, labels, k)
    return labels, _centroids(X, w, labels, k)


def _hartigan(X, w, labels, k):
    """Single-point moves that strictly lower the weighted objective."""
    labels = labels.copy()
    for _ in range(10 * len(X) + 10):
        moved = False
        W = np.bincount(labels, weights=w, minlength=k)
        C = _centroids(X, w, labels, k)
        for a in range(len(X)):
            if w[a] <= 0:
                continue
            src = labels[a]
            if np.sum(labels == src) <= 1:
                continue
            d2 = np.sum((C - X[a]) ** 2, axis=1)
            stay = w[a] * W[src] / (W[src] - w[a]) * d2[src] if W[src] > w[a] else math.inf
            gain = w[a] * W / (W + w[a]) * d2
            gain[src] = math.inf
            dst = int(np.argmin(gain))
            if gain[dst] < stay - 1e-12 * max(1.0, stay):
                labels[a] = dst
                moved = True
                W = np.bincount(labels, weights=w, minlength=k)
                C = _centroids(X, w, labels, k)
        if not moved:
            break
    return labels


def cluster_zones(mazs: Sequence[Maz], k: int, rng_seed: int = 0,
                  n_restarts: int = N_RESTARTS) -> ZonePartition:
    """Cluster MAZs into ``k`` zones minimising the trips-squared weighted SSE.

    Parameters
    ----------
    mazs : sequence of Maz
    k : int
        Number of zones; at most the number of distinct MAZ positions.
    rng_seed : int
        Seed for the k-means++ restarts. The result is a pure function of
        the inputs and this seed.
    n_restarts : int

    Returns
    -------
    ZonePartition
        The best of the restarts, ties going to the earliest restart.
    """
    if k < 1:
        raise ZoningError("k must be positive")
    X = np.array([[m.x, m.y] for m in mazs], dtype=float)
    t = np.array([m.trips for m in mazs], dtype=float)
    if len(mazs) == 0:
        raise ZoningError("no MAZs to cluster")
    distinct = len({(m.x, m.y) for m in mazs})
    if k > distinct:
        raise ZoningError(f"k={k} exceeds the {distinct} distinct MAZ positions")
    w = t ** 2
    if w.sum() == 0:
        w = np.ones_like(w)
    rng = np.random.default_rng(rng_seed)
    best = None
    for _ in range(n_restarts):
        C0 = _plusplus(X, w, k, rng)
        if len(C0) < k:
            continue
        labels, C = _lloyd(X, w, C0, k)
        labels = _hartigan(X, w, labels, k)
        labels, C = _lloyd(X, w, _centroids(X, w, labels, k), k)
        obj = weighted_objective(X, w, labels, C)
        if best is None or obj < best[0] - 1e-12 * max(1.0, abs(obj)):
            best = (obj, labels, C)
    if best is None:
        raise ZoningError("seeding failed to place k distinct centroids")
    obj, labels, C = best
    return ZonePartition([m.id for m in mazs], X, t, labels, C, obj)


# ---------------------------------------------------------------- geometry
def bounding_box(points: np.ndarray, inflate: float = BOX_INFLATE) -> Polygon:
    lo, hi = points.min(axis=0), points.max(axis=0)
    span = hi - lo
    pad = inflate * np.where(span > 0, span, max(span.max(), 1.0))
    return box(*(lo - pad), *(hi + pad))


def _clip(poly: np.ndarray, normal: np.ndarray, offset: float) -> np.ndarray:
    """Keep the part of a convex polygon where ``normal . p <= offset``."""
    out = []
    n = len(poly)
    for a in range(n):
        p, q = poly[a], poly[(a + 1) % n]
        fp, fq = normal @ p - offset, normal @ q - offset
        if fp <= 0:
            out.append(p)
        if fp * fq < 0:
            out.append(p + (q - p) * (fp / (fp - fq)))
    return np.array(out) if out else np.zeros((0, 2))


def voronoi_cells(sites: np.ndarray, region: Polygon) -> List[Polygon]:
    """Voronoi cells of ``sites`` restricted to the convex ``region``.

    Coincident sites are separated by a 1e-9 km deterministic nudge.
    """
    sites = np.asarray(sites, dtype=float).copy()
    for i in range(len(sites)):
        for j in range(i):
            if np.allclose(sites[i], sites[j], atol=PERTURB, rtol=0):
                sites[i] += PERTURB * np.array([math.cos(i), math.sin(i)])
    base = np.asarray(region.exterior.coords)[:-1]
    cells = []
    for i, s in enumerate(sites):
        poly = base
        for j, q in enumerate(sites):
            if i == j or len(poly) == 0:
                continue
            normal = q - s
            offset = normal @ (0.5 * (q + s))
            poly = _clip(poly, normal, offset)
        cells.append(Polygon(poly) if len(poly) >= 3 else Polygon())
    return cells


def derive_zone_geometry(partition: ZonePartition,
                         city_boundary: Optional[BaseGeometry] = None) -> List[Zone]:
    """Attach Voronoi cells, characteristic lengths and city flags to clusters.

    The characteristic length is twice the trip-weighted mean distance from
    member MAZs to their cell boundary.
    """
    region = bounding_box(partition.positions)
    cells = voronoi_cells(partition.centroids, region)
    zones = []
    for z in range(partition.k):
        sel = np.flatnonzero(partition.labels == z)
        cell = cells[z]
        ring = cell.exterior
        d = np.array([ring.distance(Point(*partition.positions[a])) for a in sel])
        tw = partition.trips[sel]
        mean = float(tw @ d / tw.sum()) if tw.sum() > 0 else float(d.mean())
        length = 2.0 * mean
        if length <= 0:
            length = 0.5 * math.sqrt(cell.area) if cell.area > 0 else 1e-6
        c = partition.centroids[z]
        is_city = bool(city_boundary is not None and not city_boundary.is_empty
                       and city_boundary.covers(Point(*c)))
        zones.append(Zone(z, (float(c[0]), float(c[1])), length, is_city,
                          [partition.maz_ids[a] for a in sel], cell))
    return zones


def mean_boundary_distance(poly: Polygon, n: int = 200_000, seed: int = 0) -> float:
    """Monte-Carlo mean distance from uniform points in ``poly`` to its boundary."""
    rng = np.random.default_rng(seed)
    minx, miny, maxx, maxy = poly.bounds
    pts = []
    while sum(len(p) for p in pts) < n:
        cand = rng.uniform([minx, miny], [maxx, maxy], size=(n, 2))
        inside = shapely.contains_xy(poly, cand[:, 0], cand[:, 1])
        pts.append(cand[inside])
    P = np.concatenate(pts)[:n]
    return float(np.mean(shapely.distance(poly.exterior, shapely.points(P))))


def zone_adjacency(zones: Sequence[Zone], tol: float = 1e-9) -> List[Tuple[int, int]]:
    """Unordered pairs whose cells share a boundary of positive length."""
    out = []
    for i in range(len(zones)):
        for j in range(i + 1, len(zones)):
            ci, cj = zones[i].cell, zones[j].cell
            if ci is None or cj is None or ci.distance(cj) > tol:
                continue
            if ci.intersection(cj).length > tol:
                out.append((i, j))
    return out


def clear_distances(zones: Sequence[Zone], pairs: Iterable[Tuple[int, int]]) -> Dict[tuple, float]:
    """Gap between the two cells of each pair, zero when they touch."""
    out = {}
    for i, j in pairs:
        ci, cj = zones[i].cell, zones[j].cell
        if ci is not None and cj is not None:
            d = float(ci.distance(cj))
        else:
            gap = math.dist(zones[i].centroid, zones[j].centroid)
            d = max(0.0, gap - 0.5 * (zones[i].length + zones[j].length))
        out[(i, j)] = out[(j, i)] = d
    return out


# ------------------------------------------------------------------ demand
@dataclass
class DemandMatrix:
    """Zone-to-zone trips per hour with the diagonal held at zero."""

    matrix: np.ndarray
    dropped_intrazonal: float = 0.0
    remapped: float = 0.0
    total_input: float = 0.0

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def pairs(self) -> List[Tuple[int, int, float]]:
        i, j = np.nonzero(self.matrix)
        return [(int(a), int(b), float(self.matrix[a, b])) for a, b in zip(i, j)]

    def total(self) -> float:
        return float(self.matrix.sum())


def aggregate_demand(maz_od: Iterable[Tuple[object, object, float]], partition: ZonePartition,
                     peripheral_rule: bool = False,
                     positions: Optional[Mapping[object, Tuple[float, float]]] = None
                     ) -> DemandMatrix:
    """Sum MAZ-level O-D trips into zone pairs.

    Intrazonal trips are dropped and their total reported. With
    ``peripheral_rule`` on, MAZs outside the partition are mapped to the
    zone with the nearest centroid using ``positions``; their trips are
    counted in ``remapped`` (and also in the matrix or the dropped total).
    """
    zone_of = partition.zone_of()
    k = partition.k
    E = np.zeros((k, k))
    dropped = remapped = total = 0.0
    missing = set()
    C = partition.centroids

    def lookup(mid):
        if mid in zone_of:
            return zone_of[mid], False
        if peripheral_rule and positions is not None and mid in positions:
            p = np.asarray(positions[mid], dtype=float)
            z = int(np.argmin(np.sum((C - p) ** 2, axis=1)))
            zone_of[mid] = z
            return z, True
        missing.add(mid)
        return None, False

    rows = []
    for o, d, trips in maz_od:
        if trips < 0:
            raise ZoningError(f"negative trips for {o}->{d}")
        zo, ro = lookup(o)
        zd, rd = lookup(d)
        rows.append((zo, zd, float(trips), ro or rd))
    if missing:
        raise ZoningError(f"MAZs not in any zone: {sorted(map(str, missing))}")
    for zo, zd, trips, was_remapped in rows:
        total += trips
        if was_remapped:
            remapped += trips
        if zo == zd:
            dropped += trips
        else:
            E[zo, zd] += trips
    return DemandMatrix(E, dropped, remapped, total)


# ------------------------------------------------------------------- links
@dataclass
class CandidateLinkSet:
    """Per-mode ordered zone pairs plus existing-link counts.

    ``pairs[mode]`` is a sorted list containing both ``(i, j)`` and ``(j, i)``;
    ``existing[mode][(i, j)]`` counts physical links already built.
    """

    pairs: Dict[str, List[Tuple[int, int]]] = field(default_factory=dict)
    existing: Dict[str, Dict[Tuple[int, int], int]] = field(default_factory=dict)

    def undirected(self, mode: str) -> List[Tuple[int, int]]:
        return sorted({(min(i, j), max(i, j)) for i, j in self.pairs.get(mode, [])})

    def exist(self, mode: str, i: int, j: int) -> int:
        return self.existing.get(mode, {}).get((i, j), 0)

    def count(self, mode: str) -> int:
        return len(self.pairs.get(mode, []))


def generate_candidate_links(zones: Sequence[Zone], demand: DemandMatrix,
                             existing: Optional[Mapping[str, Mapping[tuple, int]]],
                             n_adj: int, n_direct: int, modes: Sequence,
                             ) -> CandidateLinkSet:
    """Candidate interzonal pairs for every mode.

    Each zone links to the zones whose cells touch its own, its ``n_adj``
    nearest zones by centroid distance, its ``n_direct`` zones with the
    highest two-way demand, and every zone it already shares a built link
    with in any mode. The union is symmetrised and shared by all modes.

    Parameters
    ----------
    modes : sequence
        ``ModeSpec`` objects (or names, then no mode is infrastructure).
    """
    if n_adj < 0 or n_direct < 0:
        raise ZoningError("n_adj and n_direct must be non-negative")
    n = len(zones)
    base = set(zone_adjacency(zones))
    C = np.array([z.centroid for z in zones], dtype=float).reshape(n, 2)
    D = np.sqrt(np.sum((C[:, None] - C[None]) ** 2, axis=2))
    E = demand.matrix
    both = E + E.T
    for i in range(n):
        order = sorted((j for j in range(n) if j != i), key=lambda j: (D[i, j], j))
        for j in order[:n_adj]:
            base.add((min(i, j), max(i, j)))
        ranked = sorted((j for j in range(n) if j != i and both[i, j] > 0),
                        key=lambda j: (-both[i, j], j))
        for j in ranked[:n_direct]:
            base.add((min(i, j), max(i, j)))
    existing = existing or {}
    for counts in existing.values():
        for (i, j), c in counts.items():
            if c > 0 and i != j:
                base.add((min(i, j), max(i, j)))
    ordered = sorted(base | {(j, i) for i, j in base})
    out = CandidateLinkSet()
    for m in modes:
        name = getattr(m, "name", m)
        infra = bool(getattr(m, "is_infrastructure", False))
        out.pairs[name] = list(ordered)
        ex = {}
        if infra:
            for (i, j), c in existing.get(name, {}).items():
                if c > 0:
                    ex[(i, j)] = ex[(j, i)] = max(int(c), ex.get((i, j), 0))
        out.existing[name] = ex
    return out
