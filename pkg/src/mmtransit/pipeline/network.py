"""Map existing line geometry onto zones to count built links."""
from __future__ import annotations

import logging
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from shapely.geometry import LineString

from ..zoning import Zone

log = logging.getLogger(__name__)


def zone_sequence(line: LineString, zones: Sequence[Zone]) -> List[int]:
    """Zones a polyline passes through, in order along the line.

    Each straight segment is cut by the cells and every piece is placed at
    its midpoint along that segment, so lines that retrace themselves keep
    their order. Repeats of the same zone in a row collapse.
    """
    pieces = []
    coords = list(line.coords)
    for k, (a, b) in enumerate(zip(coords, coords[1:])):
        seg = LineString([a, b])
        if seg.length <= 0:
            continue
        for z in zones:
            if z.cell is None or not z.cell.intersects(seg):
                continue
            inter = z.cell.intersection(seg)
            for p in getattr(inter, "geoms", [inter]):
                if p.geom_type != "LineString" or p.length <= 0:
                    continue
                pos = seg.project(p.interpolate(0.5, normalized=True), normalized=True)
                pieces.append((k, pos, z.id))
    pieces.sort()
    seq: List[int] = []
    for _, _, zid in pieces:
        if not seq or seq[-1] != zid:
            seq.append(zid)
    return seq


def import_existing_network(lines: Mapping[str, Sequence[Sequence[Tuple[float, float]]]],
                            zones: Sequence[Zone], modes: Optional[Sequence] = None
                            ) -> Dict[str, Dict[Tuple[int, int], int]]:
    """Count existing links per mode and zone pair.

    Each polyline adds one link to every pair of consecutive zones it
    crosses, in both directions; a line crossing the same pair twice still
    adds one. Lines outside every cell are skipped with a warning.

    Parameters
    ----------
    lines : mapping
        ``mode -> [polyline, ...]`` with polylines as coordinate lists (km).
    modes : sequence of ModeSpec, optional
        When given, lines of modes that are absent or not infrastructure
        modes are skipped with a warning.

    Returns
    -------
    dict
        ``mode -> {(i, j): count}`` holding both ``(i, j)`` and ``(j, i)``.
    """
    allowed = None
    if modes is not None:
        allowed = {m.name for m in modes if m.is_infrastructure}
    out: Dict[str, Dict[Tuple[int, int], int]] = {}
    for mode in sorted(lines):
        if allowed is not None and mode not in allowed:
            log.warning("skipping %d existing %s lines: not an infrastructure mode of "
                        "this scenario", len(lines[mode]), mode)
            continue
        counts: Dict[Tuple[int, int], int] = {}
        for n, coords in enumerate(lines[mode]):
            if len(coords) < 2:
                raise ValueError(f"{mode} line {n} has fewer than 2 points")
            seq = zone_sequence(LineString(coords), zones)
            if not seq:
                log.warning("%s line %d lies outside every zone; skipped", mode, n)
                continue
            pairs = {(min(a, b), max(a, b)) for a, b in zip(seq, seq[1:])}
            for a, b in pairs:
                counts[(a, b)] = counts.get((a, b), 0) + 1
                counts[(b, a)] = counts.get((b, a), 0) + 1
        out[mode] = dict(sorted(counts.items()))
    return out
