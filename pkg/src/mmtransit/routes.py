"""Chain link segments of one transit mode into routes.

Each flow-bearing link is split into as many route segments as its flow
needs at the design headway and occupancy. A segment end sitting in a zone
can be joined to at most one segment end of another link in that zone;
joined segments belong to the same route. A rider moving between two
segments that are not joined makes an intramodal transfer. The route MILP
picks the joins that minimise transfers given the zonal flows. The myopic
baseline joins segments greedily, one junction at a time.

Bi-directional operation (the default) treats a segment as serving both
directions of its link, so segments are keyed by ``(a, b, k)`` with
``a < b``. Uni-directional operation keys segments by the directed link.
"""
from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .milp import BINARY, CONTINUOUS, MilpModel, Status
from .milp.bnb import solve as bnb_solve

log = logging.getLogger(__name__)

Seg = Tuple[int, int, int]
EPS_DIRECT = 1e-7
FLOW_TOL = 1e-9


class RouteError(ValueError):
    pass


# ------------------------------------------------------------------ flows
@dataclass
class ModeFlows:
    """Flows of one mode, split into maximal single-mode runs.

    A run is ``(origin, destination, zones, trips)`` where ``zones`` lists
    the zones visited on consecutive links of this mode. Runs start at the
    origin or after a switch onto the mode and end at the destination or
    at a switch off it.
    """

    mode: str
    runs: List[Tuple[int, int, Tuple[int, ...], float]] = field(default_factory=list)

    @property
    def start(self) -> Dict[Tuple[int, int], float]:
        out: Dict[tuple, float] = defaultdict(float)
        for o, d, zones, f in self.runs:
            out[(o, zones[0])] += f
        return dict(out)

    @property
    def end(self) -> Dict[Tuple[int, int], float]:
        out: Dict[tuple, float] = defaultdict(float)
        for o, d, zones, f in self.runs:
            out[(o, zones[-1])] += f
        return dict(out)

    @property
    def link(self) -> Dict[Tuple[int, int, int], float]:
        out: Dict[tuple, float] = defaultdict(float)
        for o, d, zones, f in self.runs:
            for i, j in zip(zones, zones[1:]):
                out[(o, i, j)] += f
        return dict(out)

    def link_totals(self) -> Dict[Tuple[int, int], float]:
        out: Dict[tuple, float] = defaultdict(float)
        for (o, i, j), f in self.link.items():
            out[(i, j)] += f
        return dict(out)

    def trips(self) -> float:
        return sum(f for *_, f in self.runs)


def mode_flows(od_paths: Iterable, mode: str) -> ModeFlows:
    """Collect the runs of ``mode`` from per-origin path decompositions."""
    out = ModeFlows(mode)
    for pf in od_paths:
        for d in sorted(pf.paths):
            for arcs, f in pf.paths[d]:
                run: List[int] = []
                for tag in arcs:
                    if tag[0] == "link" and tag[1] == mode:
                        if run and run[-1] == tag[2]:
                            run.append(tag[3])
                        else:
                            if len(run) > 1:
                                out.runs.append((pf.origin, d, tuple(run), f))
                            run = [tag[2], tag[3]]
                    elif run:
                        out.runs.append((pf.origin, d, tuple(run), f))
                        run = []
                if len(run) > 1:
                    out.runs.append((pf.origin, d, tuple(run), f))
    return out


# --------------------------------------------------------------- segments
@dataclass
class SegmentNetwork:
    """Active links of one mode and their route segments."""

    mode: str
    flows: Dict[Tuple[int, int], float]
    counts: Dict[Tuple[int, int], int]
    bidirectional: bool = True
    lengths: Dict[Tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        for key, n in self.counts.items():
            if n < 1:
                raise RouteError(f"link {key} needs at least one segment")

    def key(self, i: int, j: int) -> Tuple[int, int]:
        return (min(i, j), max(i, j)) if self.bidirectional else (i, j)

    def segments(self, i: int, j: int) -> List[Seg]:
        a, b = self.key(i, j)
        n = self.counts.get((a, b), 0)
        return [(a, b, k) for k in range(1, n + 1)]

    def all_segments(self) -> List[Seg]:
        return [s for key in sorted(self.counts) for s in self.segments(*key)]

    def has(self, i: int, j: int) -> bool:
        return self.key(i, j) in self.counts

    def length(self, seg: Seg) -> float:
        return self.lengths.get((seg[0], seg[1]), 0.0)

    @property
    def n_segments(self) -> int:
        return sum(self.counts.values())


def segment_count(flow: float, h_design: float, r_design: float) -> int:
    """Routes needed to carry ``flow`` at the design headway and occupancy."""
    if flow <= FLOW_TOL:
        return 0
    return max(1, int(math.ceil(flow * h_design / r_design - 1e-9)))


def derive_segments(source, mode, h_design: Optional[float] = None,
                    r_design: Optional[float] = None, bidirectional: bool = True,
                    lengths: Optional[Dict] = None) -> SegmentNetwork:
    """Split every flow-bearing link of ``mode`` into route segments.

    Parameters
    ----------
    source : ModeFlows or ZonalSolution
        Link flows of the mode. A zonal solution contributes its link flows
        summed over origins.
    mode : str or ModeSpec
        When a ``ModeSpec``, its design headway and occupancy are the
        defaults for ``h_design`` and ``r_design``.
    bidirectional : bool
        Size a link by the larger of its two directional flows and share
        the segments between directions.
    lengths : dict, optional
        ``(i, j) -> km`` used for route lengths.
    """
    name = getattr(mode, "name", mode)
    h = h_design if h_design is not None else mode.require("design_headway")
    r = r_design if r_design is not None else mode.require("design_occ")
    if isinstance(source, ModeFlows):
        totals = source.link_totals()
    else:
        totals = defaultdict(float)
        for (o, m, i, j), v in source.fl.items():
            if m == name:
                totals[(i, j)] += v
    flows = {k: v for k, v in sorted(totals.items()) if v > FLOW_TOL}
    counts: Dict[tuple, int] = {}
    for (i, j), f in flows.items():
        key = (min(i, j), max(i, j)) if bidirectional else (i, j)
        counts[key] = max(counts.get(key, 0), segment_count(f, h, r))
    lens = {}
    for key in counts:
        if lengths is not None:
            for k in (key, key[::-1]):
                if k in lengths:
                    lens[key] = float(lengths[k])
                    break
    return SegmentNetwork(name, flows, counts, bidirectional, lens)


# ----------------------------------------------------------------- model
@dataclass
class RouteModel:
    model: MilpModel
    net: SegmentNetwork
    flows: ModeFlows
    x: Dict[tuple, int] = field(default_factory=dict)
    fs: Dict[tuple, int] = field(default_factory=dict)
    fe: Dict[tuple, int] = field(default_factory=dict)
    fl: Dict[tuple, int] = field(default_factory=dict)
    fd: Dict[tuple, int] = field(default_factory=dict)
    ft: Dict[tuple, int] = field(default_factory=dict)


def _seg_name(u: Seg) -> str:
    return f"{u[0]}_{u[1]}_{u[2]}"


def _pair_key(net: SegmentNetwork, j: int, u1: Seg, u2: Seg) -> tuple:
    """Connection key at zone ``j``; unordered when bi-directional."""
    if net.bidirectional:
        return (j,) + ((u1, u2) if u1 < u2 else (u2, u1))
    return (j, u1, u2)


def _other(u: Seg, j: int) -> int:
    return u[1] if u[0] == j else u[0]


def _through_flows(net: SegmentNetwork, flows: ModeFlows) -> Dict[tuple, float]:
    """Flow continuing through each zone between two different links."""
    out: Dict[tuple, float] = defaultdict(float)
    for o, d, zones, f in flows.runs:
        for i, j, k in zip(zones, zones[1:], zones[2:]):
            k1, k2 = net.key(i, j), net.key(j, k)
            if k1 == k2:
                continue
            if net.bidirectional and k2 < k1:
                k1, k2 = k2, k1
            out[(j, k1, k2)] += f
    return dict(out)


def build_route_model(net: SegmentNetwork, flows, big_m: Optional[float] = None,
                      od_paths=None) -> RouteModel:
    """Transfer-minimising segment chaining model for one mode.

    Parameters
    ----------
    net : SegmentNetwork
    flows : ModeFlows
        Per-origin start, end and link flows the segments must carry.
    big_m : float, optional
        Upper bound on a connection's direct flow. Defaults to the direct
        flow the connection could carry at most, plus one.

    Raises
    ------
    RouteError
        When a flow uses a link missing from ``net``.
    """
    if not isinstance(flows, ModeFlows):
        if od_paths is None:
            raise RouteError("a zonal solution needs its path decomposition")
        flows = mode_flows(od_paths, net.mode)
    link = {k: v for k, v in flows.link.items() if v > FLOW_TOL}
    for (o, i, j) in link:
        if not net.has(i, j):
            raise RouteError(f"flow from origin {o} uses link {i}->{j} absent from the network")
    start = {k: v for k, v in flows.start.items() if v > FLOW_TOL}
    end = {k: v for k, v in flows.end.items() if v > FLOW_TOL}
    m = MilpModel(f"routes_{net.mode}")
    rm = RouteModel(m, net, flows)
    inflow: Dict[int, float] = defaultdict(float)
    for (i, j), f in net.flows.items():
        inflow[j] += f

    by_origin_out: Dict[tuple, List[int]] = defaultdict(list)
    by_origin_in: Dict[tuple, List[int]] = defaultdict(list)
    for (o, i, j) in sorted(link):
        by_origin_out[(o, i)].append(j)
        by_origin_in[(o, j)].append(i)
        for u in net.segments(i, j):
            rm.fl[(o, u, i, j)] = m.add_var(f"fl.o{o}.{_seg_name(u)}.{i}.{j}")

    # connection candidates: pairs of segment ends carrying through flow
    through = _through_flows(net, flows)
    for (j, k1, k2), f in sorted(through.items()):
        if f <= FLOW_TOL:
            continue
        for u1 in net.segments(*k1):
            for u2 in net.segments(*k2):
                key = _pair_key(net, j, u1, u2)
                if key not in rm.x:
                    rm.x[key] = m.add_var(
                        f"x.{j}.{_seg_name(key[1])}.{_seg_name(key[2])}", 0, 1, BINARY)

    for (o, i), v in sorted(start.items()):
        for j in by_origin_out.get((o, i), []):
            for u in net.segments(i, j):
                rm.fs[(o, u, i, j)] = m.add_var(f"fs.o{o}.{_seg_name(u)}.{i}.{j}")
    for (o, j), v in sorted(end.items()):
        for i in by_origin_in.get((o, j), []):
            for u in net.segments(i, j):
                rm.fe[(o, u, i, j)] = m.add_var(f"fe.o{o}.{_seg_name(u)}.{i}.{j}")
    for (o, j) in sorted(by_origin_in):
        for i in by_origin_in[(o, j)]:
            for k in by_origin_out.get((o, j), []):
                for u1 in net.segments(i, j):
                    for u2 in net.segments(j, k):
                        tag = f"o{o}.{j}.{_seg_name(u1)}.{i}.{_seg_name(u2)}.{k}"
                        rm.ft[(o, j, u1, i, u2, k)] = m.add_var("ft." + tag, 0, math.inf,
                                                                CONTINUOUS, 1.0)
                        if _pair_key(net, j, u1, u2) in rm.x:
                            rm.fd[(o, j, u1, i, u2, k)] = m.add_var("fd." + tag)

    # start and end totals match the zonal flows
    for (o, i), v in sorted(start.items()):
        vs = [var for (oo, u, a, b), var in rm.fs.items() if oo == o and a == i]
        if not vs:
            raise RouteError(f"origin {o} boards in zone {i} but has no link flow there")
        m.add_constr({var: 1.0 for var in vs}, "=", v, f"start.o{o}.{i}")
    for (o, j), v in sorted(end.items()):
        vs = [var for (oo, u, a, b), var in rm.fe.items() if oo == o and b == j]
        if not vs:
            raise RouteError(f"origin {o} alights in zone {j} but has no link flow there")
        m.add_constr({var: 1.0 for var in vs}, "=", v, f"end.o{o}.{j}")
    for (o, i, j), v in sorted(link.items()):
        m.add_constr({rm.fl[(o, u, i, j)]: 1.0 for u in net.segments(i, j)}, "=", v,
                     f"link.o{o}.{i}.{j}")

    into: Dict[tuple, List[int]] = defaultdict(list)
    outof: Dict[tuple, List[int]] = defaultdict(list)
    for d in (rm.ft, rm.fd):
        for (o, j, u1, i, u2, k), var in d.items():
            outof[(o, u1, i, j)].append(var)
            into[(o, u2, j, k)].append(var)
    for (o, u, i, j), var in rm.fl.items():
        row = [(var, 1.0)]
        if (o, u, i, j) in rm.fs:
            row.append((rm.fs[(o, u, i, j)], -1.0))
        row += [(w, -1.0) for w in into[(o, u, i, j)]]
        m.add_constr(row, "=", 0.0, f"in.o{o}.{_seg_name(u)}.{i}.{j}")
        row = [(var, 1.0)]
        if (o, u, i, j) in rm.fe:
            row.append((rm.fe[(o, u, i, j)], -1.0))
        row += [(w, -1.0) for w in outof[(o, u, i, j)]]
        m.add_constr(row, "=", 0.0, f"out.o{o}.{_seg_name(u)}.{i}.{j}")

    # direct flow of one origin is bounded by its flow on either link
    direct: Dict[tuple, List[int]] = defaultdict(list)
    reach: Dict[tuple, float] = defaultdict(float)
    for (o, j, u1, i, u2, k), var in sorted(rm.fd.items()):
        key = _pair_key(net, j, u1, u2)
        direct[key].append(var)
        cap = min(link[(o, i, j)], link[(o, j, k)])
        reach[key] += cap
        m.add_constr({var: 1.0, rm.x[key]: -cap}, "<=", 0.0,
                     f"vub.o{o}.{j}.{_seg_name(u1)}.{i}.{_seg_name(u2)}.{k}")
    for key, xv in sorted(rm.x.items()):
        j = key[0]
        mu = big_m if big_m is not None else min(inflow[j], reach.get(key, 0.0)) + 1.0
        tag = f"{j}.{_seg_name(key[1])}.{_seg_name(key[2])}"
        ds = direct.get(key, [])
        m.add_constr([(v, 1.0) for v in ds] + [(xv, -mu)], "<=", 0.0, f"bigm.{tag}")
        m.add_constr([(xv, EPS_DIRECT)] + [(v, -1.0) for v in ds], "<=", 0.0, f"used.{tag}")

    # each segment end joins at most one other segment end
    ends: Dict[tuple, List[int]] = defaultdict(list)
    for key, xv in rm.x.items():
        j, u1, u2 = key
        if net.bidirectional:
            ends[(j, u1)].append(xv)
            ends[(j, u2)].append(xv)
        else:
            ends[("out", j, u1)].append(xv)
            ends[("in", j, u2)].append(xv)
    for key in sorted(ends, key=str):
        if len(ends[key]) > 1:
            m.add_constr({v: 1.0 for v in ends[key]}, "<=", 1.0,
                         "degree." + ".".join(str(p) if not isinstance(p, tuple) else _seg_name(p)
                                              for p in key))
    return rm


@dataclass
class RouteGenSolution:
    status: Status
    objective: float
    connections: Dict[tuple, int]
    net: SegmentNetwork
    flows: ModeFlows
    values: Dict[str, Dict[tuple, float]]
    gap: float = 0.0
    nodes: int = 0

    @property
    def joined(self) -> List[tuple]:
        return sorted(k for k, v in self.connections.items() if v)


def solve_routes(rm: RouteModel, rel_gap: float = 1e-9,
                 time_limit: Optional[float] = None) -> RouteGenSolution:
    """Solve a route model and round the joins to 0/1."""
    if rm.model.n_vars == 0:
        return RouteGenSolution(Status.OPTIMAL, 0.0, {}, rm.net, rm.flows,
                                {k: {} for k in ("fs", "fe", "fl", "fd", "ft")})
    ms = bnb_solve(rm.model, rel_gap=rel_gap, time_limit=time_limit)
    if ms.x is None:
        raise RouteError(f"route model {ms.status.value}: {ms.message}")
    conn = {k: int(round(ms.x[v])) for k, v in rm.x.items()}
    values = {name: {k: float(ms.x[v]) for k, v in getattr(rm, name).items()}
              for name in ("fs", "fe", "fl", "fd", "ft")}
    return RouteGenSolution(ms.status, ms.objective, conn, rm.net, rm.flows, values,
                            ms.gap, ms.nodes)


# ----------------------------------------------------------------- plans
@dataclass
class Route:
    mode: str
    zones: Tuple[int, ...]
    segments: Tuple[Seg, ...]
    length: float
    trips: float = 0.0


@dataclass
class TransferCount:
    total: float
    by_od: Dict[Tuple[int, int], float]
    boardings: Dict[int, float]


@dataclass
class RoutePlan:
    mode: str
    routes: List[Route]
    connections: frozenset
    bidirectional: bool = True
    trips: float = 0.0
    transfers: float = 0.0
    by_od: Dict[Tuple[int, int], float] = field(default_factory=dict)

    @property
    def count(self) -> int:
        return len(self.routes)

    @property
    def avg_length(self) -> float:
        return sum(r.length for r in self.routes) / len(self.routes) if self.routes else 0.0

    def route_of(self) -> Dict[Seg, int]:
        return {u: k for k, r in enumerate(self.routes) for u in r.segments}

    def joined(self, j: int, u1: Seg, u2: Seg) -> bool:
        if self.bidirectional:
            key = (j,) + ((u1, u2) if u1 < u2 else (u2, u1))
        else:
            key = (j, u1, u2)
        return key in self.connections


def _chains(net: SegmentNetwork, joined: Sequence[tuple]):
    """Yield ``(zones, segments)`` for each maximal chain of joined segments."""
    bidir = net.bidirectional
    nbr: Dict[tuple, Seg] = {}
    for j, u1, u2 in joined:
        pairs = ((u1, j, u2), (u2, j, u1)) if bidir else ((u1, "out", u2), (u2, "in", u1))
        for a, side, b in pairs:
            if (a, side) in nbr:
                raise RouteError(f"segment {a} joined twice in zone {j}")
            nbr[(a, side)] = b

    def free_ends(u):
        if bidir:
            return [z for z in (u[0], u[1]) if (u, z) not in nbr]
        return [u[0]] if (u, "in") not in nbr else []

    def walk(first, z0):
        order, zs = [first], [z0, _other(first, z0)]
        cur = first
        while True:
            key = (cur, zs[-1]) if bidir else (cur, "out")
            nxt = nbr.get(key)
            if nxt is None or nxt == first:
                return tuple(zs), tuple(order)
            order.append(nxt)
            zs.append(_other(nxt, zs[-1]))
            cur = nxt

    seen = set()
    for u in net.all_segments():
        if u in seen:
            continue
        comp, stack = {u}, [u]
        while stack:
            s = stack.pop()
            sides = (s[0], s[1]) if bidir else ("in", "out")
            for side in sides:
                v = nbr.get((s, side))
                if v is not None and v not in comp:
                    comp.add(v)
                    stack.append(v)
        starts = sorted((z, s) for s in comp for z in free_ends(s))
        if starts:
            z0, first = starts[0]
        else:
            if bidir:
                z0 = min(z for s in comp for z in (s[0], s[1]))
                first = min(s for s in comp if z0 in (s[0], s[1]))
            else:
                z0 = min(s[0] for s in comp)
                first = min(s for s in comp if s[0] == z0)
            log.warning("route on %s forms a cycle; breaking it in zone %d", net.mode, z0)
        zs, order = walk(first, z0)
        seen.update(order)
        yield zs, order


def _make_plan(net: SegmentNetwork, joined: Sequence[tuple], flows: ModeFlows) -> RoutePlan:
    routes = [Route(net.mode, zs, segs, sum(net.length(s) for s in segs))
              for zs, segs in _chains(net, joined)]
    routes.sort(key=lambda r: (r.segments[0], r.zones))
    plan = RoutePlan(net.mode, routes, frozenset(joined), net.bidirectional, flows.trips())
    tc = count_transfers(plan, flows)
    plan.transfers = tc.total
    plan.by_od = tc.by_od
    for k, r in enumerate(plan.routes):
        r.trips = tc.boardings.get(k, 0.0)
    return plan


def assemble_routes(rsol: RouteGenSolution, net: Optional[SegmentNetwork] = None) -> RoutePlan:
    """Turn the joins of a solved route model into routes.

    Joined segments form chains; unjoined segments are routes of their
    own. A bi-directional chain is listed once, starting from its end with
    the lower zone id. Cycles are cut in their lowest zone with a warning.
    """
    net = net or rsol.net
    return _make_plan(net, rsol.joined, rsol.flows)


def count_transfers(plan: RoutePlan, flows: ModeFlows) -> TransferCount:
    """Intramodal transfers of every run when riders pick segments optimally.

    Each run walks its links in order; staying on a segment joined to the
    previous one is free, anything else costs one transfer per trip. The
    cheapest segment sequence is found by dynamic programming, with ties
    broken towards lower segment ids.

    Raises
    ------
    RouteError
        When a run uses a link the plan does not cover.
    """
    route_of = plan.route_of()
    by_od: Dict[tuple, float] = defaultdict(float)
    board: Dict[int, float] = defaultdict(float)
    total = 0.0
    bidir = plan.bidirectional

    def segs(i, j):
        key = (min(i, j), max(i, j)) if bidir else (i, j)
        out = sorted(u for u in route_of if (u[0], u[1]) == key)
        if not out:
            raise RouteError(f"plan for {plan.mode} does not cover link {i}->{j}")
        return out

    for o, d, zones, f in flows.runs:
        layers = [segs(i, j) for i, j in zip(zones, zones[1:])]
        cost = {u: 0 for u in layers[0]}
        back: List[Dict[Seg, Seg]] = []
        for t in range(1, len(layers)):
            j = zones[t]
            new, ptr = {}, {}
            for u2 in layers[t]:
                best = None
                for u1 in layers[t - 1]:
                    c = cost[u1] + (0 if plan.joined(j, u1, u2) else 1)
                    if best is None or c < best[0]:
                        best = (c, u1)
                new[u2], ptr[u2] = best
            cost = new
            back.append(ptr)
        last = min(cost, key=lambda u: (cost[u], u))
        n = cost[last]
        path = [last]
        for ptr in reversed(back):
            path.append(ptr[path[-1]])
        path.reverse()
        board[route_of[path[0]]] += f
        for t in range(1, len(path)):
            if not plan.joined(zones[t], path[t - 1], path[t]):
                board[route_of[path[t]]] += f
        by_od[(o, d)] += n * f
        total += n * f
    return TransferCount(total, dict(by_od), dict(board))


def myopic_routes(net: SegmentNetwork, flows: ModeFlows) -> RoutePlan:
    """Greedy junction-by-junction segment joining.

    Junctions are visited by decreasing through flow, then zone id. In each
    junction the link pair with the most remaining through flow is joined
    on the lowest-numbered free segment end of each link, and the pair is
    then considered served. Only pairs with positive through flow are
    joined.
    """
    through = _through_flows(net, flows)
    per_zone: Dict[int, float] = defaultdict(float)
    for (j, k1, k2), f in through.items():
        per_zone[j] += f
    used = set()
    joined = []
    for j in sorted(per_zone, key=lambda z: (-per_zone[z], z)):
        pairs = sorted(((f, k1, k2) for (jj, k1, k2), f in through.items()
                        if jj == j and f > FLOW_TOL), key=lambda t: (-t[0], t[1], t[2]))
        for f, k1, k2 in pairs:
            side1 = (j, "out") if not net.bidirectional else (j,)
            side2 = (j, "in") if not net.bidirectional else (j,)
            u1 = next((u for u in net.segments(*k1) if (u,) + side1 not in used), None)
            u2 = next((u for u in net.segments(*k2) if (u,) + side2 not in used), None)
            if u1 is None or u2 is None:
                continue
            used.add((u1,) + side1)
            used.add((u2,) + side2)
            joined.append(_pair_key(net, j, u1, u2))
    return _make_plan(net, sorted(joined), flows)


# ----------------------------------------------------------------- driver
@dataclass
class ModeRouting:
    net: SegmentNetwork
    solution: RouteGenSolution
    plan: RoutePlan
    myopic: RoutePlan


def generate_routes(flows: ModeFlows, mode, lengths: Optional[Dict] = None,
                    bidirectional: bool = True, time_limit: Optional[float] = None
                    ) -> ModeRouting:
    """Segments, route MILP, assembled plan and myopic baseline for one mode."""
    net = derive_segments(flows, mode, bidirectional=bidirectional, lengths=lengths)
    rm = build_route_model(net, flows)
    rsol = solve_routes(rm, time_limit=time_limit)
    return ModeRouting(net, rsol, assemble_routes(rsol), myopic_routes(net, flows))
