"""Small hand-built zonal instances shared by several test modules."""
import numpy as np

from mmtransit.costs import build_cost_tables
from mmtransit.params import default_profile
from mmtransit.synthetic import ZonalInstance
from mmtransit.zoning import CandidateLinkSet, DemandMatrix, Zone


def line_instance(E, modes, lengths=None, pairs=None, existing=None, spacing=4.0,
                  profile=None, city=False):
    """Zones on a line, ``spacing`` km apart, linked by ``pairs`` (default: neighbours)."""
    E = np.asarray(E, dtype=float)
    n = E.shape[0]
    prof = (profile or default_profile()).select(modes)
    lengths = lengths or [2.0] * n
    zones = [Zone(k, (spacing * k, 0.0), lengths[k], city, [k], None) for k in range(n)]
    pairs = pairs if pairs is not None else [(k, k + 1) for k in range(n - 1)]
    ordered = sorted(set(pairs) | {(j, i) for i, j in pairs})
    ex = {}
    for m in prof.modes:
        e = {}
        if m.is_infrastructure:
            for (i, j), c in (existing or {}).get(m.name, {}).items():
                e[(i, j)] = e[(j, i)] = c
        ex[m.name] = e
    links = CandidateLinkSet({m.name: list(ordered) for m in prof.modes}, ex)
    costs = build_cost_tables(zones, prof.modes, links.pairs, prof.globals)
    return ZonalInstance(zones, DemandMatrix(E, total_input=float(E.sum())), links, costs, prof)
