"""Scenario tables, per-origin mode splits and a plain-text summary."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from ..zonal import ScenarioMetrics, ZonalSolution, summarize
from .io import write_table

SPLIT_SHOWN = 1.0  # percent of boardings a mode needs for its averages to be listed


@dataclass
class ReportBundle:
    """Inputs of :func:`emit_report`."""

    solution: ZonalSolution
    routes: dict
    modes: Sequence[str]
    compute_hours: Optional[float] = None
    metrics: Optional[ScenarioMetrics] = None
    settings: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.metrics is None:
            self.metrics = summarize(self.solution)


def table2_rows(b: ReportBundle) -> List[Tuple[str, str, object]]:
    """``(row name, unit, value)`` rows; ``None`` marks a value not shown."""
    m, sol = b.metrics, b.solution
    shown = [x for x in b.modes if m.split_trips.get(x, 0.0) > SPLIT_SHOWN]
    n_int = b.settings.get("n_integer")
    n_cont = b.settings.get("n_continuous")
    rows: List[Tuple[str, str, object]] = [
        ("Computation time", "h", b.compute_hours),
        ("Objective", "$", sol.objective),
        ("Lower Bound", "$", sol.bound),
        ("Solution gap", "%", 100.0 * sol.gap),
        ("Number of variables: Continuous", "", n_cont),
        ("Number of variables: Integer", "", n_int),
        ("Average generalized cost", "$/trip", m.generalized_cost),
        ("Average journey time", "min/trip", m.journey_time),
        ("Average start time", "min/trip", m.start_time),
        ("Average interzonal travel time", "min/trip", m.interzonal_time),
        ("Average transfer time", "min/trip", m.transfer_time),
        ("Average end time", "min/trip", m.end_time),
        ("Average number of intermodal transfers", "/trip", m.transfers_per_trip),
        ("Average operating cost", "$/trip", m.operating_cost),
        ("Average emissions cost", "$/trip", m.emissions_cost),
    ]
    for x in b.modes:
        rows.append((f"Modal split by trip count: {x}", "%", m.split_trips.get(x, 0.0)))
    for x in b.modes:
        rows.append((f"Modal split by distance traveled: {x}", "%", m.split_distance.get(x, 0.0)))
    for label, unit, d in (("Average trip distance", "km/trip", m.avg_distance),
                           ("Average speed (including dwell time)", "km/h", m.avg_speed),
                           ("Average operating cost", "cents/pax-km", m.cost_per_pkm)):
        for x in b.modes:
            rows.append((f"{label}: {x}", unit, d.get(x) if x in shown else None))
    return rows


def _pct(new, old):
    if old == 0:
        return None
    return 100.0 * (new - old) / old


def table3_rows(routes_doc: dict) -> List[Tuple[str, str, object, object, object]]:
    """``(mode, quantity, myopic, milp, % difference)`` rows."""
    rows = []
    for mode, e in sorted(routes_doc.get("modes", {}).items()):
        my, mi = e["myopic"], e["milp"]
        rows.append((mode, "Trips", e["trips"], e["trips"], None))
        rows.append((mode, "Intramodal transfers", my["transfers"], mi["transfers"],
                     _pct(mi["transfers"], my["transfers"])))
        rows.append((mode, "Routes", my["count"], mi["count"], _pct(mi["count"], my["count"])))
    if not rows:
        rows.append(("-", "Routes", 0, 0, None))
    return rows


def origin_split_rows(sol: ZonalSolution) -> List[tuple]:
    """Per origin and mode: boardings, distance and both shares in percent."""
    costs = sol.context.costs
    board: Dict[tuple, float] = defaultdict(float)
    dist: Dict[tuple, float] = defaultdict(float)
    for (o, m), v in sol.fa.items():
        board[(o, m)] += v
    for (o, m1, m2, i), v in sol.fx.items():
        board[(o, m2)] += v
    for (o, m, i, j), v in sol.fl.items():
        dist[(o, m)] += v * costs.link_dist[(m, i, j)]
    origins = sorted({o for o, _ in board} | {o for o, _ in dist})
    names = [m.name for m in sol.context.modes]
    rows = []
    for o in origins:
        tb = sum(board[(o, m)] for m in names)
        td = sum(dist[(o, m)] for m in names)
        for m in names:
            b, d = board[(o, m)], dist[(o, m)]
            if b == 0 and d == 0:
                continue
            rows.append((o, m, b, 100.0 * b / tb if tb > 0 else 0.0, d,
                         100.0 * d / td if td > 0 else 0.0))
    return rows


def _fmt(v, unit="") -> str:
    if v is None:
        return "/"
    if isinstance(v, int):
        return f"{v:,d}"
    if unit == "$" or abs(v) >= 1e4:
        return f"{v:,.0f}"
    return f"{v:.2f}" if unit == "%" else f"{v:.4g}"


def render_text(b: ReportBundle) -> str:
    lines = ["Zonal connection results", ""]
    lines.append(f"status: {b.solution.status.value}")
    for name, unit, v in table2_rows(b):
        u = f" ({unit})" if unit else ""
        lines.append(f"{name}{u}: {_fmt(v, unit)}")
    lines += ["", "Routing results (myopic / MILP / % difference)", ""]
    for mode, what, my, mi, pct in table3_rows(b.routes):
        lines.append(f"{mode:6s} {what:22s} {_fmt(my)} / {_fmt(mi)} / "
                     f"{'/' if pct is None else f'{pct:+.1f}%'}")
    return "\n".join(lines) + "\n"


def emit_report(bundle: ReportBundle, out_dir) -> Dict[str, Path]:
    """Write ``table2.tsv``, ``table3.tsv``, ``origin_splits.tsv`` and ``report.txt``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "table2.tsv": write_table(out / "table2.tsv", ("row", "unit", "value"),
                                  table2_rows(bundle)),
        "table3.tsv": write_table(out / "table3.tsv",
                                  ("mode", "number_of", "myopic", "milp", "pct_difference"),
                                  table3_rows(bundle.routes)),
        "origin_splits.tsv": write_table(
            out / "origin_splits.tsv",
            ("origin", "mode", "boardings", "share_trips_pct", "pax_km", "share_distance_pct"),
            origin_split_rows(bundle.solution)),
    }
    p = out / "report.txt"
    p.write_text(render_text(bundle), encoding="utf-8")
    files["report.txt"] = p
    return files
