"""Scenario configuration files.

A scenario file is TOML::

    [scenario]
    k = 20                      # number of zones
    seed = 0
    budget = "500 M$"           # overrides globals.budget
    modes = ["BRT", "LBUS", "SAV"]
    trips_scale = 1.0           # multiplies every O-D trip count
    peripheral_rule = false

    [options]
    capacity = true
    min_flow = false
    no_backflow = false
    bidirectional_routes = true

    [solver]
    name = "builtin"            # or "external:CMD"
    gap = 0.01
    time_limit = "10 min"

    [inputs]
    mazs = "mazs.csv"           # id,x_km,y_km[,trips]
    od = "od.csv"               # origin_id,dest_id,trips
    city = "city.geojson"       # optional
    existing = "lines.geojson"  # optional
    profile = "my.profile"      # optional base profile

    [output]
    dir = "out"

    # optional parameter overrides, same layout as a profile
    [globals]
    vot = "20 $/h"
    [mode.BRT]
    design_headway = "6 min"

Relative paths are resolved against the directory of the scenario file.
"""
from __future__ import annotations

import copy
import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

from ..params import ConfigError, Profile, parse_quantity, profile_from_dict, tomllib
from ..zonal import ZonalOptions

_SECTIONS = {"scenario", "options", "solver", "inputs", "output", "globals", "mode"}


@dataclass
class ScenarioConfig:
    """Everything needed to run one scenario end to end."""

    profile: Profile
    k: int
    mazs_path: Path
    od_path: Path
    out_dir: Path
    rng_seed: int = 0
    budget: float = 0.0
    city_path: Optional[Path] = None
    existing_path: Optional[Path] = None
    trips_scale: float = 1.0
    peripheral_rule: bool = False
    include_capacity: bool = True
    include_min_flow: bool = False
    include_no_backflow: bool = False
    bidirectional_routes: bool = True
    solver: str = "builtin"
    gap: float = 0.01
    time_limit: Optional[float] = None
    source: Optional[Path] = None
    raw: Dict[str, Any] = field(default_factory=dict)

    @property
    def modes(self) -> Tuple[str, ...]:
        return tuple(m.name for m in self.profile.modes)

    def zonal_options(self) -> ZonalOptions:
        return ZonalOptions(budget=self.budget, include_capacity=self.include_capacity,
                            include_min_flow=self.include_min_flow,
                            include_no_backflow=self.include_no_backflow)

    def validate(self) -> None:
        if self.k < 2:
            raise ConfigError(f"k must be at least 2, got {self.k}")
        if not self.budget >= 0:
            raise ConfigError("budget must be non-negative")
        if not 0 <= self.gap < 1:
            raise ConfigError("solver gap must lie in [0, 1)")
        if self.time_limit is not None and self.time_limit <= 0:
            raise ConfigError("time limit must be positive")
        if self.trips_scale < 0:
            raise ConfigError("trips_scale must be non-negative")
        if not (self.solver == "builtin" or self.solver.startswith("external:")):
            raise ConfigError(f"solver must be 'builtin' or 'external:CMD', got {self.solver!r}")
        if self.include_no_backflow and not self.include_min_flow:
            raise ConfigError("options.no_backflow requires options.min_flow")
        for p in (self.mazs_path, self.od_path, self.city_path, self.existing_path):
            if p is not None and not p.is_file():
                raise ConfigError(f"input file not found: {p}")

    def with_overrides(self, seed=None, budget=None, gap=None, time_limit=None,
                       solver=None, out=None) -> "ScenarioConfig":
        """Copy with command-line overrides applied and re-validated."""
        changes = {}
        if seed is not None:
            changes["rng_seed"] = int(seed)
        if budget is not None:
            changes["budget"] = _money(budget, "--budget")
        if gap is not None:
            changes["gap"] = float(gap)
        if time_limit is not None:
            changes["time_limit"] = float(time_limit)
        if solver is not None:
            changes["solver"] = solver
        if out is not None:
            changes["out_dir"] = Path(out)
        cfg = dataclasses.replace(self, **changes)
        cfg.validate()
        return cfg

    def describe(self) -> Dict[str, Any]:
        """Plain settings echoed into output documents."""
        return {
            "k": self.k, "seed": self.rng_seed, "budget": self.budget,
            "modes": list(self.modes), "trips_scale": self.trips_scale,
            "peripheral_rule": self.peripheral_rule,
            "options": {"capacity": self.include_capacity, "min_flow": self.include_min_flow,
                        "no_backflow": self.include_no_backflow,
                        "bidirectional_routes": self.bidirectional_routes},
            "solver": {"name": self.solver, "gap": self.gap, "time_limit": self.time_limit},
        }


def _money(value, name) -> float:
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return parse_quantity(value, "money", name)
    return float(value)


def _merge(base: Dict, over: Mapping) -> Dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, Mapping) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _profile_doc(path: Optional[Path]) -> Dict:
    if path is None:
        text = resources.files("mmtransit").joinpath("data/defaults.profile").read_text()
    else:
        text = path.read_text()
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"profile {path or 'defaults'}: {exc}") from None


def config_from_dict(doc: Mapping, base_dir=".") -> ScenarioConfig:
    """Build a validated config from a parsed scenario document."""
    base = Path(base_dir)
    unknown = set(doc) - _SECTIONS
    if unknown:
        raise ConfigError(f"unknown sections: {sorted(unknown)}")
    sc = dict(doc.get("scenario", {}))
    opts = dict(doc.get("options", {}))
    solver = dict(doc.get("solver", {}))
    inputs = dict(doc.get("inputs", {}))
    output = dict(doc.get("output", {}))

    def path(key, required):
        if key not in inputs:
            if required:
                raise ConfigError(f"inputs.{key} is required")
            return None
        p = Path(inputs[key])
        return p if p.is_absolute() else base / p

    prof_path = path("profile", False)
    pdoc = _merge(_profile_doc(prof_path),
                  {k: doc[k] for k in ("globals", "mode") if k in doc})
    profile = profile_from_dict(pdoc)
    modes = sc.get("modes")
    if modes is not None:
        profile = profile.select(modes)
    budget = sc.get("budget")
    budget = profile.globals.budget if budget is None else _money(budget, "scenario.budget")
    if "k" not in sc:
        raise ConfigError("scenario.k is required")
    tl = solver.get("time_limit")
    if isinstance(tl, str):
        tl = parse_quantity(tl, "time", "solver.time_limit") * 3600.0
    out_dir = Path(output.get("dir", "out"))
    cfg = ScenarioConfig(
        profile=profile, k=int(sc["k"]), mazs_path=path("mazs", True), od_path=path("od", True),
        out_dir=out_dir if out_dir.is_absolute() else base / out_dir,
        rng_seed=int(sc.get("seed", 0)), budget=budget, city_path=path("city", False),
        existing_path=path("existing", False), trips_scale=float(sc.get("trips_scale", 1.0)),
        peripheral_rule=bool(sc.get("peripheral_rule", False)),
        include_capacity=bool(opts.get("capacity", True)),
        include_min_flow=bool(opts.get("min_flow", False)),
        include_no_backflow=bool(opts.get("no_backflow", False)),
        bidirectional_routes=bool(opts.get("bidirectional_routes", True)),
        solver=str(solver.get("name", "builtin")), gap=float(solver.get("gap", 0.01)),
        time_limit=None if tl is None else float(tl), raw=dict(doc))
    cfg.validate()
    return cfg


def load_config(path) -> ScenarioConfig:
    """Read and validate a scenario file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    cfg = config_from_dict(doc, path.parent)
    cfg.source = path
    return cfg
