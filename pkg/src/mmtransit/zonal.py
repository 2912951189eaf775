"""Zonal connection design as an origin-indexed multi-commodity flow MILP.

Each origin zone is one commodity. Its trips leave on some mode (start
arcs), travel along candidate links of any mode, may switch modes inside a
zone (transfer arcs), and finish in their destination zone (end arcs).
Integer variables count physical links per mode and undirected zone pair
(``xl``) and the links that must be newly built (``xw``). The objective is
traveller time priced at the value of time plus operator cost for line-haul
vehicles and feeders.

Variable keys used throughout:

``fa[o, m]``          trips from origin ``o`` starting on mode ``m``
``fb[o, m, d]``       trips from ``o`` ending at ``d`` off mode ``m``
``fl[o, m, i, j]``    trips from ``o`` riding mode ``m`` from zone ``i`` to ``j``
``fx[o, m1, m2, i]``  trips from ``o`` switching from ``m1`` to ``m2`` in ``i``
``xl[m, i, j]``       links of mode ``m`` between ``i`` and ``j`` (``i < j``)
``xw[m, i, j]``       of which newly built (infrastructure modes only)
``xp[o, i, j]``       direction indicator for origin ``o`` (backflow option)
"""
from __future__ import annotations

import math
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .costs import CostTables
from .milp import (BINARY, CONTINUOUS, FEAS_TOL, INTEGER, MilpModel, MilpSolution, Status,
                   solve_lp_relaxation)
from .milp.bnb import solve as bnb_solve
from .params import GlobalParams, ModeSpec
from .zoning import CandidateLinkSet, DemandMatrix


ZERO_TOL = 1e-10


class UnreachableDemandError(ValueError):
    """Some O-D pair has no path in the candidate network."""

    def __init__(self, pairs):
        self.pairs = sorted(pairs)
        shown = ", ".join(f"{o}->{d}" for o, d in self.pairs[:20])
        more = "" if len(self.pairs) <= 20 else f" (+{len(self.pairs) - 20} more)"
        super().__init__(f"no multimodal path for demand pairs: {shown}{more}")


class InfeasibleModelError(RuntimeError):
    pass


@dataclass
class ZonalOptions:
    """Switches for the optional constraint families.

    ``include_capacity`` bounds transit link flow by link count times
    ``max_occ / min_headway``. When off, a flow may use a transit link only
    if at least one link exists, and capacity is checked after the solve.
    ``include_min_flow`` requires a minimum average two-way flow per built
    link. ``include_no_backflow`` lets each origin use a zone pair in one
    direction only. ``end_feeder_zone`` picks the zone whose feeder
    operator cost prices an ending flow: ``"destination"`` (where the
    feeder runs) or ``"origin"`` (the commodity's origin zone).
    """

    budget: Optional[float] = None
    include_capacity: bool = True
    include_min_flow: bool = False
    include_no_backflow: bool = False
    modes_enabled: Optional[Sequence[str]] = None
    end_feeder_zone: str = "destination"

    def __post_init__(self):
        if self.end_feeder_zone not in ("destination", "origin"):
            raise ValueError("end_feeder_zone must be 'destination' or 'origin'")
        if self.include_no_backflow and not self.include_min_flow:
            raise ValueError("include_no_backflow requires include_min_flow")
        if self.budget is not None and self.budget < 0:
            raise ValueError("budget must be non-negative")


@dataclass
class ZonalModel:
    model: MilpModel
    modes: Tuple[ModeSpec, ...]
    costs: CostTables
    demand: DemandMatrix
    links: CandidateLinkSet
    g: GlobalParams
    opts: ZonalOptions
    budget: float
    fa: Dict[tuple, int] = field(default_factory=dict)
    fb: Dict[tuple, int] = field(default_factory=dict)
    fl: Dict[tuple, int] = field(default_factory=dict)
    fx: Dict[tuple, int] = field(default_factory=dict)
    xl: Dict[tuple, int] = field(default_factory=dict)
    xw: Dict[tuple, int] = field(default_factory=dict)
    xp: Dict[tuple, int] = field(default_factory=dict)
    usable: Dict[str, set] = field(default_factory=dict)
    relaxed: set = field(default_factory=set)

    @property
    def n_integer(self) -> int:
        """Integer variables of the formulation, counting those solved as continuous."""
        return self.model.n_integer + len(self.relaxed)

    def mode(self, name: str) -> ModeSpec:
        for m in self.modes:
            if m.name == name:
                return m
        raise KeyError(name)


@dataclass
class Violation:
    eq: str
    index: tuple
    magnitude: float

    def __str__(self):
        return f"[{self.eq}] {self.index}: {self.magnitude:.6g}"


@dataclass
class ValidationReport:
    violations: List[Violation] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return bool(self.violations)

    def __len__(self):
        return len(self.violations)

    def add(self, eq, index, magnitude):
        self.violations.append(Violation(eq, tuple(index), float(magnitude)))


@dataclass
class ZonalSolution:
    status: Status
    objective: float
    bound: float
    gap: float
    nodes: int
    root_bound: float
    fa: Dict[tuple, float]
    fb: Dict[tuple, float]
    fl: Dict[tuple, float]
    fx: Dict[tuple, float]
    xl: Dict[tuple, int]
    xw: Dict[tuple, int]
    xp: Dict[tuple, int]
    context: ZonalModel
    milp: MilpSolution
    capacity_report: Optional[ValidationReport] = None

    def link_flow(self, mode: str) -> Dict[Tuple[int, int], float]:
        """Total flow per directed link of ``mode``, summed over origins."""
        out: Dict[Tuple[int, int], float] = defaultdict(float)
        for (o, m, i, j), v in self.fl.items():
            if m == mode:
                out[(i, j)] += v
        return dict(out)

    def links(self, mode: str) -> int:
        return sum(v for (m, i, j), v in self.xl.items() if m == mode and i < j)


def _key(*parts) -> str:
    return ".".join(str(p) for p in parts)


def _pair(i, j):
    return (i, j) if i < j else (j, i)


def _int_cap(mode: ModeSpec, total: float) -> int:
    return int(math.ceil(total * mode.require("design_headway") / mode.require("design_occ") - 1e-9))


def reachability(zm_modes, links: CandidateLinkSet, usable, demand: DemandMatrix):
    """Return the O-D pairs with positive demand that no path can serve."""
    n = demand.n
    bad = []
    adj: Dict[tuple, List[tuple]] = defaultdict(list)
    names = [m.name for m in zm_modes]
    for m in names:
        for i, j in links.pairs.get(m, []):
            if (i, j) in usable[m]:
                adj[(m, i)].append((m, j))
    for o in range(n):
        dests = np.flatnonzero(demand.matrix[o] > 0)
        if dests.size == 0:
            continue
        seen = {(m, o) for m in names}
        queue = deque(sorted(seen))
        while queue:
            m, i = queue.popleft()
            nxt = list(adj[(m, i)])
            if i != o:
                nxt += [(m2, i) for m2 in names if m2 != m]
            for v in nxt:
                if v not in seen and v[1] != o:
                    seen.add(v)
                    queue.append(v)
        reached = {i for _, i in seen}
        bad += [(o, int(d)) for d in dests if int(d) not in reached or int(d) == o]
    return bad


def build_zonal_model(costs: CostTables, demand: DemandMatrix, modes: Sequence[ModeSpec],
                      g: GlobalParams, links: CandidateLinkSet,
                      opts: Optional[ZonalOptions] = None) -> ZonalModel:
    """Assemble the zonal connection MILP.

    Raises
    ------
    UnreachableDemandError
        Before any model is built, when some O-D pair with positive demand
        has no path through the usable candidate links.
    """
    opts = opts or ZonalOptions()
    if opts.modes_enabled is not None:
        modes = [m for m in modes if m.name in set(opts.modes_enabled)]
    modes = tuple(modes)
    budget = g.budget if opts.budget is None else opts.budget
    E = demand.matrix
    n = demand.n
    total = float(E.sum())
    out_dem = E.sum(axis=1)
    names = [m.name for m in modes]
    mi = {m.name: costs.index(m.name) for m in modes}
    vot = g.vot

    # which directed links can carry flow, and integer caps per undirected pair
    usable: Dict[str, set] = {}
    caps: Dict[tuple, Tuple[int, int]] = {}
    for m in modes:
        ok = set()
        for i, j in links.pairs.get(m.name, []):
            if i == j:
                continue
            if not m.is_transit:
                ok.add((i, j))
                continue
            a, b = _pair(i, j)
            if (m.name, a, b) not in caps:
                ex = links.exist(m.name, a, b) if m.is_infrastructure else 0
                cap = _int_cap(m, total) + ex
                build = cap
                if m.is_infrastructure:
                    unit = m.require("infra_cost") * costs.link_dist[(m.name, a, b)]
                    build = int(math.floor(budget / unit + 1e-9)) if unit > 0 else cap
                    cap = min(cap, ex + build)
                caps[(m.name, a, b)] = (cap, min(build, cap))
            if caps[(m.name, a, b)][0] > 0:
                ok.add((i, j))
        usable[m.name] = ok
    bad = reachability(modes, links, usable, demand)
    if bad:
        raise UnreachableDemandError(bad)

    model = MilpModel("zonal")
    zm = ZonalModel(model, modes, costs, demand, links, g, opts, budget, usable=usable)

    # integer link variables, one per mode and undirected pair; without
    # infrastructure or a minimum flow a link count costs nothing, so it is
    # solved as continuous and rounded up afterwards
    for m in modes:
        if not m.is_transit:
            continue
        free = not m.is_infrastructure and not opts.include_min_flow
        for a, b in sorted({_pair(i, j) for i, j in usable[m.name]}):
            cap, build = caps[(m.name, a, b)]
            zm.xl[(m.name, a, b)] = model.add_var(_key("xl", m.name, a, b), 0, cap,
                                                  CONTINUOUS if free else INTEGER)
            if free:
                zm.relaxed.add((m.name, a, b))
            if m.is_infrastructure:
                zm.xw[(m.name, a, b)] = model.add_var(_key("xw", m.name, a, b), 0, build, INTEGER)

    for o in range(n):
        D = out_dem[o]
        if D <= 0:
            continue
        for m in modes:
            a = mi[m.name]
            ub = g.sav_start_cap if m.is_sav else math.inf
            coef = vot * costs.start[a, o] + costs.feeder_op[a, o]
            zm.fa[(o, m.name)] = model.add_var(_key("fa", o, m.name), 0, ub, CONTINUOUS, coef)
            for d in range(n):
                if d != o and E[o, d] > 0:
                    fz = d if opts.end_feeder_zone == "destination" else o
                    coef = vot * costs.end[a, d] + costs.feeder_op[a, fz]
                    zm.fb[(o, m.name, d)] = model.add_var(_key("fb", o, m.name, d), 0, math.inf,
                                                          CONTINUOUS, coef)
            occ = m.design_occ
            for i, j in sorted(usable[m.name]):
                if j == o:
                    continue
                t = costs.link_time[(m.name, i, j)]
                dist = costs.link_dist[(m.name, i, j)]
                coef = vot * t
                if occ:
                    coef += (m.op_cost * t + m.em_cost * dist) / occ
                zm.fl[(o, m.name, i, j)] = model.add_var(_key("fl", o, m.name, i, j), 0,
                                                         math.inf, CONTINUOUS, coef)
        for i in range(n):
            if i == o:
                continue
            for m1 in modes:
                for m2 in modes:
                    if m1.name == m2.name:
                        continue
                    tc = costs.transfer[mi[m1.name], mi[m2.name]]
                    zm.fx[(o, m1.name, m2.name, i)] = model.add_var(
                        _key("fx", o, m1.name, m2.name, i), 0, math.inf, CONTINUOUS, vot * tc)

    # adjacency of flow variables per origin and node
    out_arcs: Dict[tuple, List[int]] = defaultdict(list)
    in_arcs: Dict[tuple, List[int]] = defaultdict(list)
    for (o, m, i, j), v in zm.fl.items():
        out_arcs[(o, m, i)].append(v)
        in_arcs[(o, m, j)].append(v)
    x_out: Dict[tuple, List[int]] = defaultdict(list)
    x_in: Dict[tuple, List[int]] = defaultdict(list)
    for (o, m1, m2, i), v in zm.fx.items():
        x_out[(o, m1, i)].append(v)
        x_in[(o, m2, i)].append(v)

    for o in range(n):
        D = out_dem[o]
        if D <= 0:
            continue
        model.add_constr({zm.fa[(o, m)]: 1.0 for m in names}, "=", D, _key("demand", o))
        for d in range(n):
            if d != o and E[o, d] > 0:
                model.add_constr({zm.fb[(o, m, d)]: 1.0 for m in names}, "=", E[o, d],
                                 _key("arrive", o, d))
        for m in names:
            row = [(zm.fa[(o, m)], 1.0)] + [(v, -1.0) for v in out_arcs[(o, m, o)]]
            model.add_constr(row, "=", 0.0, _key("leave", o, m))
        for i in range(n):
            if i == o:
                continue
            for m in names:
                row = [(v, 1.0) for v in in_arcs[(o, m, i)]]
                row += [(v, 1.0) for v in x_in[(o, m, i)]]
                row += [(v, -1.0) for v in out_arcs[(o, m, i)]]
                row += [(v, -1.0) for v in x_out[(o, m, i)]]
                if (o, m, i) in zm.fb:
                    row.append((zm.fb[(o, m, i)], -1.0))
                if row:
                    model.add_constr(row, "=", 0.0, _key("balance", o, m, i))

    # budget over newly built infrastructure
    if zm.xw:
        row = []
        for (m, a, b), v in zm.xw.items():
            unit = zm.mode(m).require("infra_cost") * costs.link_dist[(m, a, b)]
            row.append((v, unit))
        model.add_constr(row, "<=", budget, "budget")
        for (m, a, b), v in zm.xw.items():
            ex = links.exist(m, a, b)
            model.add_constr({v: 1.0, zm.xl[(m, a, b)]: -1.0}, ">=", -ex, _key("build", m, a, b))

    link_users: Dict[tuple, List[int]] = defaultdict(list)
    for (o, m, i, j), v in zm.fl.items():
        link_users[(m, i, j)].append(v)
    big = max(total, 1.0)
    for m in modes:
        if not m.is_transit:
            continue
        per_link = (m.require("max_occ") / m.require("min_headway")
                    if opts.include_capacity else big)
        tag = "cap" if opts.include_capacity else "use"
        for (i, j) in sorted(usable[m.name]):
            users = link_users.get((m.name, i, j), [])
            if not users:
                continue
            row = [(v, 1.0) for v in users] + [(zm.xl[(m.name,) + _pair(i, j)], -per_link)]
            model.add_constr(row, "<=", 0.0, _key(tag, m.name, i, j))
        if m.is_infrastructure:
            # an acyclic flow from one origin uses a pair in one direction at
            # most and never exceeds that origin's demand
            for (mn, a, b), xv in zm.xl.items():
                if mn != m.name:
                    continue
                for o in range(n):
                    users = [zm.fl[k] for k in ((o, mn, a, b), (o, mn, b, a)) if k in zm.fl]
                    if users and out_dem[o] > 0:
                        row = [(v, 1.0) for v in users] + [(xv, -float(out_dem[o]))]
                        model.add_constr(row, "<=", 0.0, _key("link", o, mn, a, b))
        if opts.include_min_flow:
            floor = m.require("min_occ") / m.require("max_headway")
            for (mn, a, b), xv in zm.xl.items():
                if mn != m.name:
                    continue
                users = link_users.get((mn, a, b), []) + link_users.get((mn, b, a), [])
                row = [(v, 0.5) for v in users] + [(xv, -floor)]
                model.add_constr(row, ">=", 0.0, _key("minflow", mn, a, b))

    for m in modes:
        if not m.is_sav:
            continue
        occ = m.require("design_occ")
        fleet = []
        for (i, j) in sorted(usable[m.name]):
            users = link_users.get((m.name, i, j), [])
            if users:
                model.add_constr([(v, 1.0 / occ) for v in users], "<=", g.sav_link_cap,
                                 _key("savlink", i, j))
                t = costs.link_time[(m.name, i, j)]
                fleet += [(v, t / (occ * g.sav_util)) for v in users]
        for d in range(n):
            ends = [v for (o, mm, dd), v in zm.fb.items() if mm == m.name and dd == d]
            if ends:
                model.add_constr([(v, 1.0) for v in ends], "<=", g.sav_end_cap, _key("savend", d))
        if fleet:
            model.add_constr(fleet, "<=", g.sav_fleet, "fleet")

    if opts.include_no_backflow:
        for o in range(n):
            D = out_dem[o]
            if D <= 0:
                continue
            pairs = sorted({(i, j) for (oo, m, i, j) in zm.fl if oo == o})
            for i, j in pairs:
                zm.xp[(o, i, j)] = model.add_var(_key("xp", o, i, j), 0, 1, BINARY)
            for i, j in pairs:
                if i < j and (o, j, i) in zm.xp:
                    model.add_constr({zm.xp[(o, i, j)]: 1.0, zm.xp[(o, j, i)]: 1.0}, "<=", 1.0,
                                     _key("dir", o, i, j))
            for (oo, m, i, j), v in zm.fl.items():
                if oo == o:
                    model.add_constr({v: 1.0, zm.xp[(o, i, j)]: -D}, "<=", 0.0,
                                     _key("dirflow", o, m, i, j))
    return zm


def _extract(zm: ZonalModel, x: np.ndarray):
    def vals(d, integer=False):
        if integer:
            return {k: int(round(x[v])) for k, v in d.items()}
        # LP noise below the tolerance is not flow
        return {k: (float(x[v]) if abs(x[v]) > ZERO_TOL else 0.0) for k, v in d.items()}

    xl = {}
    for (m, a, b), v in zm.xl.items():
        n = math.ceil(x[v] - 1e-6) if (m, a, b) in zm.relaxed else round(x[v])
        xl[(m, a, b)] = xl[(m, b, a)] = int(max(n, 0))
    xw = {}
    for (m, a, b), v in zm.xw.items():
        xw[(m, a, b)] = xw[(m, b, a)] = int(round(x[v]))
    return vals(zm.fa), vals(zm.fb), vals(zm.fl), vals(zm.fx), xl, xw, vals(zm.xp, True)


def solve_zonal(zm: ZonalModel, rel_gap: float = 1e-6, time_limit: Optional[float] = None,
                solver: str = "builtin", engine: str = "highs") -> ZonalSolution:
    """Solve a zonal model and unpack flows and link counts.

    Parameters
    ----------
    solver : str
        ``"builtin"`` for the branch and bound, or ``"external:CMD"`` to hand
        the MPS export to an external program.

    Raises
    ------
    InfeasibleModelError
        When the solver proves the model infeasible or finds no solution.
    """
    if solver == "builtin":
        ms = bnb_solve(zm.model, rel_gap=rel_gap, time_limit=time_limit, engine=engine)
    elif solver.startswith("external:"):
        from .milp.external import solve_external

        ms = solve_external(zm.model, solver.split(":", 1)[1], time_limit=time_limit)
        if math.isnan(ms.root_bound):
            ms.root_bound = solve_lp_relaxation(zm.model).objective
    else:
        raise ValueError(f"unknown solver {solver!r}")
    if ms.x is None:
        raise InfeasibleModelError(f"zonal model {ms.status.value}: {ms.message}")
    fa, fb, fl, fx, xl, xw, xp = _extract(zm, ms.x)
    sol = ZonalSolution(ms.status, ms.objective, ms.bound, ms.gap, ms.nodes, ms.root_bound,
                        fa, fb, fl, fx, xl, xw, xp, zm, ms)
    if not zm.opts.include_capacity:
        sol.capacity_report = check_capacity(sol)
    return sol


# ------------------------------------------------------------- validation
def check_capacity(sol: ZonalSolution, tol: float = FEAS_TOL) -> ValidationReport:
    rep = ValidationReport()
    zm = sol.context
    for m in zm.modes:
        if not m.is_transit:
            continue
        cap = m.require("max_occ") / m.require("min_headway")
        for (i, j), f in sol.link_flow(m.name).items():
            excess = f - cap * sol.xl.get((m.name, i, j), 0)
            if excess > tol * max(1.0, f):
                rep.add("capacity", (m.name, i, j), excess)
    return rep


def validate_zonal(sol: ZonalSolution, demand: Optional[DemandMatrix] = None,
                   g: Optional[GlobalParams] = None, links: Optional[CandidateLinkSet] = None,
                   opts: Optional[ZonalOptions] = None, tol: float = FEAS_TOL) -> ValidationReport:
    """Re-check every constraint family on a solution.

    Each violation names the constraint family, its indices and the size
    of the breach. Arguments left as ``None`` come from the model the
    solution was built from.
    """
    zm = sol.context
    demand = demand or zm.demand
    g = g or zm.g
    links = links or zm.links
    opts = opts or zm.opts
    costs = zm.costs
    E = demand.matrix
    n = demand.n
    names = [m.name for m in zm.modes]
    rep = ValidationReport()

    def close(a, b):
        return abs(a - b) <= tol * max(1.0, abs(a), abs(b))

    for fam, d in (("start>=0", sol.fa), ("end>=0", sol.fb), ("link>=0", sol.fl),
                   ("transfer>=0", sol.fx)):
        for k, v in d.items():
            if v < -tol:
                rep.add(fam, k, -v)
    for k, v in sol.fb.items():
        if k[2] == k[0] and abs(v) > tol:
            rep.add("end-at-origin", k, v)
    for (o, m, i, j), v in sol.fl.items():
        if abs(v) > tol and (j == o or (i, j) not in set(links.pairs.get(m, []))):
            rep.add("link-forbidden", (o, m, i, j), v)
    for (o, m1, m2, i), v in sol.fx.items():
        if abs(v) > tol and m1 == m2:
            rep.add("self-transfer", (o, m1, m2, i), v)
    for d in (sol.xl, sol.xw):
        for k, v in d.items():
            if v < 0 or v != int(v):
                rep.add("integer", k, v)

    fa = defaultdict(float, sol.fa)
    fb = defaultdict(float, sol.fb)
    outf, inf_ = defaultdict(float), defaultdict(float)
    for (o, m, i, j), v in sol.fl.items():
        outf[(o, m, i)] += v
        inf_[(o, m, j)] += v
    xo, xi = defaultdict(float), defaultdict(float)
    for (o, m1, m2, i), v in sol.fx.items():
        xo[(o, m1, i)] += v
        xi[(o, m2, i)] += v
    for o in range(n):
        D = E[o].sum()
        s = sum(fa[(o, m)] for m in names)
        if not close(s, D):
            rep.add("demand", (o,), s - D)
        for d in range(n):
            if d == o:
                continue
            s = sum(fb[(o, m, d)] for m in names)
            if not close(s, E[o, d]):
                rep.add("arrive", (o, d), s - E[o, d])
        for m in names:
            r = fa[(o, m)] - outf[(o, m, o)]
            if not close(fa[(o, m)], outf[(o, m, o)]):
                rep.add("leave", (o, m), r)
            if xi[(o, m, o)] > tol or xo[(o, m, o)] > tol or inf_[(o, m, o)] > tol:
                rep.add("leave", (o, m, "inbound"), xi[(o, m, o)] + xo[(o, m, o)] + inf_[(o, m, o)])
        for i in range(n):
            if i == o:
                continue
            for m in names:
                lhs = inf_[(o, m, i)] + xi[(o, m, i)]
                rhs = outf[(o, m, i)] + xo[(o, m, i)] + fb[(o, m, i)]
                if not close(lhs, rhs):
                    rep.add("balance", (o, m, i), lhs - rhs)

    budget = zm.budget if opts.budget is None else opts.budget
    spent = 0.0
    for m in zm.modes:
        if not m.is_infrastructure:
            continue
        for (mn, i, j), v in sol.xw.items():
            if mn == m.name and i < j:
                spent += m.require("infra_cost") * costs.link_dist[(mn, i, j)] * v
        for (mn, i, j), v in sol.xl.items():
            if mn == m.name and i < j:
                ex = links.exist(mn, i, j)
                if sol.xw.get((mn, i, j), 0) < v - ex:
                    rep.add("build", (mn, i, j), v - ex - sol.xw.get((mn, i, j), 0))
    if spent > budget + tol * max(1.0, budget):
        rep.add("budget", (), spent - budget)

    for m in zm.modes:
        if not m.is_transit:
            continue
        flows = sol.link_flow(m.name)
        for (i, j), f in flows.items():
            x = sol.xl.get((m.name, i, j), 0)
            if opts.include_capacity:
                cap = m.require("max_occ") / m.require("min_headway") * x
                if f > cap + tol * max(1.0, f):
                    rep.add("capacity", (m.name, i, j), f - cap)
            elif f > tol and x == 0:
                rep.add("link-unbuilt", (m.name, i, j), f)
        for (mn, i, j), x in sol.xl.items():
            if mn != m.name:
                continue
            if sol.xl.get((mn, j, i), 0) != x:
                rep.add("symmetry", (mn, i, j), x - sol.xl.get((mn, j, i), 0))
            if opts.include_min_flow and i < j:
                avg = 0.5 * (flows.get((i, j), 0.0) + flows.get((j, i), 0.0))
                need = m.require("min_occ") / m.require("max_headway") * x
                if avg < need - tol * max(1.0, need):
                    rep.add("min-flow", (mn, i, j), need - avg)

    for m in zm.modes:
        if not m.is_sav:
            continue
        occ = m.require("design_occ")
        flows = sol.link_flow(m.name)
        veh_h = 0.0
        for (i, j), f in flows.items():
            if f / occ > g.sav_link_cap + tol * max(1.0, g.sav_link_cap):
                rep.add("sav-link", (i, j), f / occ - g.sav_link_cap)
            veh_h += f * costs.link_time[(m.name, i, j)] / (occ * g.sav_util)
        for o in range(n):
            if fa[(o, m.name)] > g.sav_start_cap + tol * g.sav_start_cap:
                rep.add("sav-start", (o,), fa[(o, m.name)] - g.sav_start_cap)
        for d in range(n):
            s = sum(fb[(o, m.name, d)] for o in range(n))
            if s > g.sav_end_cap + tol * g.sav_end_cap:
                rep.add("sav-end", (d,), s - g.sav_end_cap)
        if veh_h > g.sav_fleet + tol * g.sav_fleet:
            rep.add("sav-fleet", (), veh_h - g.sav_fleet)

    if opts.include_no_backflow:
        per = defaultdict(float)
        for (o, m, i, j), v in sol.fl.items():
            per[(o, i, j)] += v
        for (o, i, j), v in per.items():
            if i < j and v > tol and per.get((o, j, i), 0.0) > tol:
                rep.add("backflow", (o, i, j), min(v, per[(o, j, i)]))
        for (o, i, j), v in sol.xp.items():
            if i < j and v + sol.xp.get((o, j, i), 0) > 1:
                rep.add("direction", (o, i, j), v + sol.xp.get((o, j, i), 0) - 1)
        for (o, m, i, j), v in sol.fl.items():
            if v > tol and sol.xp.get((o, i, j), 0) == 0 and (o, i, j) in sol.xp:
                rep.add("direction-flow", (o, m, i, j), v)

    # destination-side switches that end cheaper than ending directly
    for (o, m1, m2, i), v in sol.fx.items():
        if v <= tol or i == o:
            continue
        a, b = costs.index(m1), costs.index(m2)
        via = costs.transfer[a, b] + costs.end[b, i]
        if fb[(o, m2, i)] > tol and via < costs.end[a, i] - 1e-12:
            rep.notes.append(f"origin {o}: {v:.3g} trips switch {m1}->{m2} in zone {i} "
                             f"to end there at lower cost")
    return rep


# ---------------------------------------------------------- decomposition
@dataclass
class OdPathFlows:
    """Per O-D list of ``(arcs, trips)`` where arcs are tagged tuples.

    Arc tags: ``("start", m, o)``, ``("link", m, i, j)``,
    ``("transfer", m1, m2, i)``, ``("end", m, d)``.
    """

    origin: int
    paths: Dict[int, List[Tuple[tuple, float]]] = field(default_factory=dict)

    def total(self, d: int) -> float:
        return sum(f for _, f in self.paths.get(d, []))


def disaggregate_od_flows(sol: ZonalSolution, demand: Optional[DemandMatrix], origin: int,
                          tol: float = 1e-9) -> OdPathFlows:
    """Split origin ``origin``'s flow tree into per-destination path flows.

    The origin's positive arcs form a single-source network whose sinks are
    the end arcs. Repeatedly following positive residual arcs from the
    source peels off one path at a time; a revisited node closes a cycle,
    whose flow is cancelled since it reaches no destination. The path
    flows reaching each destination then sum to its end-arc flows.
    """
    demand = demand or sol.context.demand
    o = origin
    arcs: Dict[tuple, List[Tuple[tuple, tuple]]] = defaultdict(list)
    resid: Dict[tuple, float] = {}

    def add(tail, head, tag, v):
        if v > tol:
            arcs[tail].append((tag, head))
            resid[tag] = v

    for (oo, m), v in sorted(sol.fa.items()):
        if oo == o:
            add("S", (m, o), ("start", m, o), v)
    for (oo, m, i, j), v in sorted(sol.fl.items()):
        if oo == o:
            add((m, i), (m, j), ("link", m, i, j), v)
    for (oo, m1, m2, i), v in sorted(sol.fx.items()):
        if oo == o:
            add((m1, i), (m2, i), ("transfer", m1, m2, i), v)
    for (oo, m, d), v in sorted(sol.fb.items()):
        if oo == o:
            add((m, d), ("T", d), ("end", m, d), v)

    out = OdPathFlows(o)
    scale = max(1.0, float(demand.matrix[o].sum()))
    for _ in range(100000):
        path, nodes, node = [], ["S"], "S"
        on_path = {"S": 0}
        while node[0] != "T":
            nxt = None
            for tag, head in arcs.get(node, []):
                if resid[tag] > tol * scale:
                    nxt = (tag, head)
                    break
            if nxt is None:
                break
            tag, head = nxt
            if head in on_path:
                # cancel the cycle closed by this arc
                cyc = path[on_path[head]:] + [tag]
                c = min(resid[t] for t in cyc)
                for t in cyc:
                    resid[t] -= c
                del path[on_path[head]:]
                del nodes[on_path[head] + 1:]
                for nd in list(on_path):
                    if on_path[nd] > on_path[head]:
                        del on_path[nd]
                node = head
                continue
            path.append(tag)
            nodes.append(head)
            on_path[head] = len(path)
            node = head
        if node == "S" or node[0] != "T":
            if not path:
                break
            # dead end: flow that does not reach a sink would break balance
            raise RuntimeError(f"origin {o}: flow stops at {node} without ending")
        f = min(resid[t] for t in path)
        for t in path:
            resid[t] -= f
        out.paths.setdefault(node[1], []).append((tuple(path), f))
    for d in range(demand.n):
        want = sum(v for (oo, m, dd), v in sol.fb.items() if oo == o and dd == d)
        got = out.total(d)
        if abs(got - want) > FEAS_TOL * max(1.0, want):
            raise RuntimeError(f"decomposition residual {got - want:.3g} for {o}->{d}")
    return out


# ---------------------------------------------------------------- metrics
@dataclass
class ScenarioMetrics:
    trips: float
    objective: float
    generalized_cost: float
    journey_time: float
    start_time: float
    interzonal_time: float
    transfer_time: float
    end_time: float
    transfers_per_trip: float
    operating_cost: float
    emissions_cost: float
    boardings: Dict[str, float]
    split_trips: Dict[str, float]
    split_distance: Dict[str, float]
    avg_distance: Dict[str, float]
    avg_speed: Dict[str, float]
    cost_per_pkm: Dict[str, float]
    mode_distance: Dict[str, float]
    mode_time: Dict[str, float]
    mode_op_cost: Dict[str, float]


def summarize(sol: ZonalSolution, demand: Optional[DemandMatrix] = None,
              costs: Optional[CostTables] = None, g: Optional[GlobalParams] = None
              ) -> ScenarioMetrics:
    """Per-trip averages and modal splits of a zonal solution.

    Times are minutes per trip and costs dollars per trip. A trip counts
    once for every mode it boards, so trip-count splits sum boardings.
    Journey time is the sum of start, interzonal, transfer and end time.
    """
    zm = sol.context
    demand = demand or zm.demand
    costs = costs or zm.costs
    g = g or zm.g
    T = float(demand.matrix.sum())
    per = 60.0 / T if T > 0 else 0.0
    names = [m.name for m in zm.modes]
    start = sum(v * costs.start[costs.index(m), o] for (o, m), v in sol.fa.items())
    end = sum(v * costs.end[costs.index(m), d] for (o, m, d), v in sol.fb.items())
    trans = sum(v * costs.transfer[costs.index(m1), costs.index(m2)]
                for (o, m1, m2, i), v in sol.fx.items())
    n_trans = sum(sol.fx.values())
    dist = {m: 0.0 for m in names}
    time_ = {m: 0.0 for m in names}
    op = {m: 0.0 for m in names}
    em = {m: 0.0 for m in names}
    for (o, m, i, j), v in sol.fl.items():
        t = costs.link_time[(m, i, j)]
        d = costs.link_dist[(m, i, j)]
        dist[m] += v * d
        time_[m] += v * t
        spec = zm.mode(m)
        if spec.design_occ:
            op[m] += v * spec.op_cost * t / spec.design_occ
            em[m] += v * spec.em_cost * d / spec.design_occ
    feeder_op = feeder_em = 0.0
    for (o, m), v in sol.fa.items():
        a = costs.index(m)
        spec = zm.mode(m)
        if costs.eta[a, o] > 0:
            k = v * costs.eta[a, o] / spec.require("feeder_design_occ")
            feeder_op += k * spec.feeder_op_cost * costs.feeder_time[a, o]
            feeder_em += k * spec.feeder_em_cost * costs.feeder_dist[a, o]
    for (o, m, d), v in sol.fb.items():
        a = costs.index(m)
        spec = zm.mode(m)
        z = d if zm.opts.end_feeder_zone == "destination" else o
        if costs.eta[a, z] > 0:
            k = v * costs.eta[a, z] / spec.require("feeder_design_occ")
            feeder_op += k * spec.feeder_op_cost * costs.feeder_time[a, z]
            feeder_em += k * spec.feeder_em_cost * costs.feeder_dist[a, z]
    board = {m: 0.0 for m in names}
    for (o, m), v in sol.fa.items():
        board[m] += v
    for (o, m1, m2, i), v in sol.fx.items():
        board[m2] += v
    tb = sum(board.values())
    td = sum(dist.values())
    split_t = {m: (100.0 * board[m] / tb if tb > 0 else 0.0) for m in names}
    split_d = {m: (100.0 * dist[m] / td if td > 0 else 0.0) for m in names}
    avg_d = {m: dist[m] / board[m] for m in names if board[m] > 0}
    avg_v = {m: dist[m] / time_[m] for m in names if time_[m] > 0}
    cpk = {m: 100.0 * op[m] / dist[m] for m in names if dist[m] > 0}
    st, it, tt, et = (float(v) for v in (start * per, sum(time_.values()) * per,
                                         trans * per, end * per))
    return ScenarioMetrics(
        trips=T, objective=sol.objective,
        generalized_cost=sol.objective / T if T > 0 else 0.0,
        journey_time=st + it + tt + et, start_time=st, interzonal_time=it,
        transfer_time=tt, end_time=et,
        transfers_per_trip=n_trans / T if T > 0 else 0.0,
        operating_cost=float(sum(op.values()) + feeder_op) / T if T > 0 else 0.0,
        emissions_cost=float(sum(em.values()) + feeder_em) / T if T > 0 else 0.0,
        boardings=board, split_trips=split_t, split_distance=split_d, avg_distance=avg_d,
        avg_speed=avg_v, cost_per_pkm=cpk, mode_distance=dist, mode_time=time_,
        mode_op_cost=op)
