"""Continuous-approximation arc costs for the multimodal zonal network.

Every zone is treated as a region of uniform demand with a characteristic
length ``l``. Access, feeder, waiting, through and transfer times are all
closed-form functions of ``l`` and the mode parameters. Times are in hours
and distances in km.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Mapping, Sequence, Tuple

import numpy as np

from .params import GlobalParams, ModeSpec


def _check(value: float, what: str) -> float:
    if not math.isfinite(value) or value < 0:
        raise ValueError(f"{what} evaluated to {value!r}; costs must be finite and non-negative")
    return value


def link_speed(mode: ModeSpec, is_city_i: bool, is_city_j: bool) -> float:
    """Speed used between two zones: the mean of the two zones' class speeds."""
    return 0.5 * (mode.speed(is_city_i) + mode.speed(is_city_j))


def clear_time(mode: ModeSpec, clear_dist: float, is_city_i: bool, is_city_j: bool) -> float:
    """Time to cover the gap between two zone boundaries."""
    if clear_dist < 0:
        raise ValueError("clear distance must be non-negative")
    return clear_dist / link_speed(mode, is_city_i, is_city_j)


def through_time(mode: ModeSpec, length: float, is_city: bool) -> float:
    """Time to traverse a zone of characteristic length ``length``, dwell included.

    Transit stops every ``station_spacing`` km. SAV stops once per zone and
    walking never stops.
    """
    if length < 0:
        raise ValueError("zone length must be non-negative")
    t = mode.detour * length / mode.speed(is_city)
    if mode.is_transit:
        t += length / mode.require("station_spacing") * mode.require("dwell")
    elif mode.is_sav and length > 0:
        t += mode.require("dwell")
    return _check(t, f"through time ({mode.name})")


def feeder_share(mode: ModeSpec, length: float, walk_speed: float) -> float:
    """Fraction of riders who need a feeder to reach a station, clamped to [0, 1]."""
    if mode.is_sav:
        return 1.0
    if not mode.is_transit:
        return 0.0
    if length <= 0:
        return 0.0
    reach = walk_speed * mode.require("walk_access_time")
    raw = 1.0 - 8.0 * reach * reach / (length * mode.require("station_spacing"))
    return min(1.0, max(0.0, raw))


def feeder_dist_time(mode: ModeSpec, length: float, is_city: bool) -> Tuple[float, float]:
    """Average feeder ride distance and time inside a zone."""
    if not (mode.is_transit or mode.is_sav):
        return 0.0, 0.0
    d = mode.feeder_detour * length / 4.0
    occ = mode.require("feeder_design_occ")
    t = d / mode.feeder_speed(is_city) + 0.5 * (occ - 1.0) * mode.require("feeder_dwell")
    return _check(d, "feeder distance"), _check(t, f"feeder time ({mode.name})")


def start_end_costs(mode: ModeSpec, length: float, is_city: bool,
                    g: GlobalParams) -> Tuple[float, float]:
    """Perceived start (access + feeder + wait) and end (egress + feeder) times."""
    eta = feeder_share(mode, length, g.walk_speed)
    _, t_f = feeder_dist_time(mode, length, is_city)
    walk = mode.walk_access_time or 0.0
    end = (1.0 - eta) * g.walk_coeff * walk + eta * (g.wait_coeff * mode.feeder_wait_time + t_f)
    start = end + g.wait_coeff * mode.wait_time
    return _check(start, "start cost"), _check(end, "end cost")


def transfer_cost(m1: ModeSpec, m2: ModeSpec, g: GlobalParams) -> float:
    """Perceived time of switching from ``m1`` to ``m2`` inside a zone."""
    if m1.name == m2.name:
        raise ValueError("transfers within one mode are not priced here")
    t = g.walk_coeff * g.transfer_time(m1.name, m2.name) + g.wait_coeff * m2.wait_time
    return _check(t, "transfer cost")


def interzonal(mode: ModeSpec, length_i: float, length_j: float, thr_i: float,
               thr_j: float, clear_dist: float, t_clear: float) -> Tuple[float, float]:
    """Distance and time of an interzonal trip between two zone centres."""
    d = 0.5 * (length_i + length_j) * mode.detour + clear_dist
    t = 0.5 * (thr_i + thr_j) + t_clear
    return _check(d, "interzonal distance"), _check(t, "interzonal time")


def feeder_operator_cost(mode: ModeSpec, eta: float, d_f: float, t_f: float) -> float:
    """Operator cost per trip using the feeder of ``mode`` in a zone."""
    if eta == 0:
        return 0.0
    occ = mode.require("feeder_design_occ")
    return eta / occ * (mode.feeder_op_cost * t_f + mode.feeder_em_cost * d_f)


@dataclass
class CostTables:
    """Arc costs for every mode, zone and candidate link.

    Per-zone arrays have shape ``(n_modes, n_zones)`` and follow the order of
    ``modes``. ``transfer[a, b]`` is the cost of switching from mode ``a`` to
    ``b`` (NaN on the diagonal). Link quantities are keyed by
    ``(mode_name, i, j)``.
    """

    modes: Tuple[str, ...]
    n_zones: int
    start: np.ndarray
    end: np.ndarray
    eta: np.ndarray
    feeder_dist: np.ndarray
    feeder_time: np.ndarray
    through: np.ndarray
    feeder_op: np.ndarray
    transfer: np.ndarray
    link_dist: Dict[tuple, float] = field(default_factory=dict)
    link_time: Dict[tuple, float] = field(default_factory=dict)
    link_clear_time: Dict[tuple, float] = field(default_factory=dict)
    clear_dist: Dict[tuple, float] = field(default_factory=dict)

    def index(self, mode: str) -> int:
        return self.modes.index(mode)


def build_cost_tables(zones: Sequence, modes: Sequence[ModeSpec], links: Mapping,
                      g: GlobalParams, clear_dist: Mapping | None = None) -> CostTables:
    """Price every arc of the zonal multimodal network.

    Parameters
    ----------
    zones : sequence
        Objects with ``length`` and ``is_city``; zone ``k`` is ``zones[k]``.
    modes : sequence of ModeSpec
    links : mapping
        ``mode_name -> iterable of (i, j)`` candidate pairs.
    g : GlobalParams
    clear_dist : mapping, optional
        ``(i, j) -> km`` gap between zone boundaries; missing pairs are 0.
    """
    clear_dist = clear_dist or {}
    nm, nz = len(modes), len(zones)
    shape = (nm, nz)
    start, end, eta, d_f, t_f, thr, f_op = (np.zeros(shape) for _ in range(7))
    for a, mode in enumerate(modes):
        for k, z in enumerate(zones):
            eta[a, k] = feeder_share(mode, z.length, g.walk_speed)
            d_f[a, k], t_f[a, k] = feeder_dist_time(mode, z.length, z.is_city)
            start[a, k], end[a, k] = start_end_costs(mode, z.length, z.is_city, g)
            thr[a, k] = through_time(mode, z.length, z.is_city)
            f_op[a, k] = feeder_operator_cost(mode, eta[a, k], d_f[a, k], t_f[a, k])
    transfer = np.full((nm, nm), np.nan)
    for a, m1 in enumerate(modes):
        for b, m2 in enumerate(modes):
            if a != b:
                transfer[a, b] = transfer_cost(m1, m2, g)
    tables = CostTables(tuple(m.name for m in modes), nz, start, end, eta, d_f, t_f,
                        thr, f_op, transfer)
    for a, mode in enumerate(modes):
        for i, j in links.get(mode.name, ()):
            zi, zj = zones[i], zones[j]
            dc = float(clear_dist.get((i, j), clear_dist.get((j, i), 0.0)))
            tc = clear_time(mode, dc, zi.is_city, zj.is_city)
            d, t = interzonal(mode, zi.length, zj.length, thr[a, i], thr[a, j], dc, tc)
            tables.link_dist[(mode.name, i, j)] = d
            tables.link_time[(mode.name, i, j)] = t
            tables.link_clear_time[(mode.name, i, j)] = tc
            tables.clear_dist[(i, j)] = dc
    return tables
