"""Readers and writers for the delimited, GeoJSON and JSON files of a scenario.

Every writer produces deterministic bytes: JSON keys are sorted, floats are
written with ``repr`` and lines end with ``\\n``.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

from shapely.geometry import shape
from shapely.ops import unary_union

from ..params import ConfigError
from ..zoning import Maz

_MAZ_COLS = {"id": ("id", "maz_id"), "x": ("x_km", "x"), "y": ("y_km", "y"),
             "trips": ("trips",)}
_OD_COLS = {"o": ("origin_id", "origin", "o"), "d": ("dest_id", "destination", "d"),
            "trips": ("trips",)}


def _columns(header: Sequence[str], spec: Mapping[str, tuple], path, optional=()) -> Dict:
    lower = [h.strip().lower() for h in header]
    out = {}
    for key, names in spec.items():
        hit = next((lower.index(n) for n in names if n in lower), None)
        if hit is None and key not in optional:
            raise ConfigError(f"{path}: missing column {names[0]!r}")
        out[key] = hit
    return out


def _number(text, path, line, what) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ConfigError(f"{path}:{line}: {what} {text!r} is not a number") from None
    if not math.isfinite(v):
        raise ConfigError(f"{path}:{line}: {what} is not finite")
    return v


def _rows(path):
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        sample = fh.read(4096)
        fh.seek(0)
        first = sample.splitlines()[0] if sample else ""
        delim = "\t" if "\t" in first else ","
        reader = csv.reader(fh, delimiter=delim)
        rows = [r for r in reader if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise ConfigError(f"{path}: empty file")
    return rows[0], rows[1:]


def read_mazs(path) -> List[Maz]:
    """MAZ table with columns ``id, x_km, y_km`` and optional ``trips``.

    Without a trips column every MAZ gets its trip count later from the
    O-D table (see :func:`maz_trip_totals`); it is set to 0 here.
    """
    header, rows = _rows(path)
    col = _columns(header, _MAZ_COLS, path, optional=("trips",))
    out, seen = [], set()
    for n, r in enumerate(rows, start=2):
        mid = r[col["id"]].strip()
        if mid in seen:
            raise ConfigError(f"{path}:{n}: duplicate MAZ id {mid!r}")
        seen.add(mid)
        trips = 0.0 if col["trips"] is None else _number(r[col["trips"]], path, n, "trips")
        if trips < 0:
            raise ConfigError(f"{path}:{n}: negative trips")
        out.append(Maz(mid, _number(r[col["x"]], path, n, "x"),
                       _number(r[col["y"]], path, n, "y"), trips))
    return out


def read_od(path, scale: float = 1.0) -> List[Tuple[str, str, float]]:
    """O-D table with columns ``origin_id, dest_id, trips``, trips scaled by ``scale``."""
    header, rows = _rows(path)
    col = _columns(header, _OD_COLS, path)
    out = []
    for n, r in enumerate(rows, start=2):
        t = _number(r[col["trips"]], path, n, "trips")
        if t < 0:
            raise ConfigError(f"{path}:{n}: negative trips")
        out.append((r[col["o"]].strip(), r[col["d"]].strip(), t * scale))
    return out


def maz_trip_totals(mazs: Sequence[Maz], od: Iterable[Tuple[str, str, float]]) -> List[Maz]:
    """Fill zero MAZ trip counts with trips starting or ending there."""
    if any(m.trips > 0 for m in mazs):
        return list(mazs)
    tot: Dict[str, float] = {}
    for o, d, t in od:
        tot[o] = tot.get(o, 0.0) + t
        tot[d] = tot.get(d, 0.0) + t
    return [Maz(m.id, m.x, m.y, tot.get(m.id, 0.0)) for m in mazs]


def _features(path) -> List[dict]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if doc.get("type") == "FeatureCollection":
        return list(doc.get("features", []))
    if doc.get("type") == "Feature":
        return [doc]
    return [{"type": "Feature", "geometry": doc, "properties": {}}]


def read_city_boundary(path):
    """Union of all polygons in a GeoJSON file."""
    polys = []
    for f in _features(path):
        g = shape(f["geometry"])
        if g.geom_type not in ("Polygon", "MultiPolygon"):
            raise ConfigError(f"{path}: city boundary must be polygonal, got {g.geom_type}")
        polys.append(g)
    return unary_union(polys) if polys else None


def read_lines(path) -> Dict[str, List[List[Tuple[float, float]]]]:
    """Existing lines as ``mode -> [polyline, ...]`` from LineString features.

    Each feature needs a ``mode`` property. MultiLineStrings contribute one
    polyline per part.
    """
    out: Dict[str, List] = {}
    for n, f in enumerate(_features(path)):
        props = f.get("properties") or {}
        mode = props.get("mode")
        if not mode:
            raise ConfigError(f"{path}: feature {n} has no 'mode' property")
        g = shape(f["geometry"])
        parts = list(g.geoms) if g.geom_type == "MultiLineString" else [g]
        for p in parts:
            if p.geom_type != "LineString":
                raise ConfigError(f"{path}: feature {n} is {p.geom_type}, expected LineString")
            coords = [(float(x), float(y)) for x, y, *_ in p.coords]
            if len(coords) < 2:
                raise ConfigError(f"{path}: feature {n} has fewer than 2 points")
            out.setdefault(str(mode), []).append(coords)
    return out


# ------------------------------------------------------------------ writers
def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def dumps(obj) -> str:
    """Canonical JSON text; non-finite floats become ``null``."""
    return json.dumps(_clean(obj), sort_keys=True, indent=1, allow_nan=False) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj), encoding="utf-8")
    return path


def read_json(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"missing stage file {path}; run the previous stage first")
    return json.loads(path.read_text(encoding="utf-8"))


def feature_collection(features: Iterable[Tuple[dict, dict]]) -> dict:
    """GeoJSON FeatureCollection from ``(geometry, properties)`` pairs."""
    return {"type": "FeatureCollection",
            "features": [{"type": "Feature", "geometry": g, "properties": p}
                         for g, p in features]}


def write_table(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Tab-separated UTF-8 table."""
    path = Path(path)
    lines = ["\t".join(header)]
    for r in rows:
        lines.append("\t".join(_cell(v) for v in r))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _cell(v) -> str:
    if v is None:
        return "/"
    if isinstance(v, float):
        return repr(float(v)) if math.isfinite(v) else "/"
    return str(v)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
