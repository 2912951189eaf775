"""Mode and global parameters, plus the unit-aware profile reader.

All quantities are stored in hours, kilometres and dollars. Profile files
are TOML documents with a ``[globals]`` table and one ``[mode.NAME]`` table
per mode; values may be bare numbers (already in base units) or strings
such as ``"7.5 min"`` or ``"575.37 M$/km"``.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

MODE_ORDER = ("RAIL", "METRO", "BRT", "XBUS", "LBUS", "SAV", "WALK")


class ConfigError(ValueError):
    """Raised for missing or malformed parameters."""


# unit -> (dimension, factor to base unit)
UNITS = {
    "h": ("time", 1.0),
    "min": ("time", 1.0 / 60.0),
    "s": ("time", 1.0 / 3600.0),
    "km": ("length", 1.0),
    "m": ("length", 1e-3),
    "km/h": ("speed", 1.0),
    "$": ("money", 1.0),
    "M$": ("money", 1e6),
    "B$": ("money", 1e9),
    "$/km": ("money/length", 1.0),
    "M$/km": ("money/length", 1e6),
    "$/h": ("money/time", 1.0),
    "$/veh-h": ("money/time", 1.0),
    "$/veh-km": ("money/length", 1.0),
    "pax/veh": ("count", 1.0),
    "trips/h": ("rate", 1.0),
    "veh/h": ("rate", 1.0),
    "veh": ("count", 1.0),
}


def parse_quantity(value, dimension: str, name: str = "value") -> Optional[float]:
    """Convert ``value`` to base units, checking the unit's dimension.

    ``None`` and ``"/"`` mean "not applicable" and are returned as ``None``.
    """
    if value is None:
        return None
    if isinstance(value, bool):
        raise ConfigError(f"{name}: boolean is not a quantity")
    if isinstance(value, (int, float)):
        return float(value)
    text = str(value).strip()
    if text == "/":
        return None
    parts = text.split()
    if len(parts) == 1:
        try:
            return float(parts[0])
        except ValueError:
            raise ConfigError(f"{name}: cannot parse {value!r}") from None
    if len(parts) != 2:
        raise ConfigError(f"{name}: expected '<number> <unit>', got {value!r}")
    number, unit = parts
    if unit not in UNITS:
        raise ConfigError(f"{name}: unknown unit {unit!r}")
    dim, factor = UNITS[unit]
    if dim != dimension:
        raise ConfigError(f"{name}: unit {unit!r} is {dim}, expected {dimension}")
    try:
        return float(number) * factor
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {value!r}") from None


@dataclass(frozen=True)
class ModeSpec:
    """Per-mode parameters. ``None`` marks a field that does not apply."""

    name: str
    is_transit: bool = False
    is_infrastructure: bool = False
    station_spacing: Optional[float] = None
    infra_cost: Optional[float] = None
    op_cost: float = 0.0
    em_cost: float = 0.0
    feeder_op_cost: float = 0.0
    feeder_em_cost: float = 0.0
    design_headway: Optional[float] = None
    min_headway: Optional[float] = None
    max_headway: Optional[float] = None
    detour: float = 1.0
    feeder_detour: float = 1.0
    design_occ: Optional[float] = None
    feeder_design_occ: Optional[float] = None
    min_occ: Optional[float] = None
    max_occ: Optional[float] = None
    walk_access_time: Optional[float] = None
    dwell: Optional[float] = None
    feeder_dwell: Optional[float] = None
    speed_city: Optional[float] = None
    speed_suburb: Optional[float] = None
    feeder_speed_city: Optional[float] = None
    feeder_speed_suburb: Optional[float] = None
    wait: Optional[float] = None
    feeder_wait: Optional[float] = None

    @property
    def is_sav(self) -> bool:
        return self.name == "SAV"

    def require(self, attr: str) -> float:
        value = getattr(self, attr)
        if value is None:
            raise ConfigError(f"mode {self.name}: parameter '{attr}' is required")
        return value

    def speed(self, is_city: bool) -> float:
        return self.require("speed_city" if is_city else "speed_suburb")

    def feeder_speed(self, is_city: bool) -> float:
        return self.require("feeder_speed_city" if is_city else "feeder_speed_suburb")

    @property
    def wait_time(self) -> float:
        """Average wait for the interzonal service (half the design headway for transit)."""
        if self.wait is not None:
            return self.wait
        if self.is_transit:
            return self.require("design_headway") / 2.0
        return 0.0

    @property
    def feeder_wait_time(self) -> float:
        if self.feeder_wait is not None:
            return self.feeder_wait
        # SAV feeders are the same vehicle as the interzonal trip
        return 0.0 if self.is_sav else 5.0 / 60.0

    @property
    def link_capacity(self) -> float:
        """Passengers per hour carried by one physical link at minimum headway."""
        return self.require("max_occ") / self.require("min_headway")

    @property
    def link_min_flow(self) -> float:
        return self.require("min_occ") / self.require("max_headway")

    def validate(self) -> None:
        if self.detour < 1 or self.feeder_detour < 1:
            raise ConfigError(f"mode {self.name}: detour factors must be >= 1")
        for attr in ("design_occ", "feeder_design_occ", "min_occ", "max_occ"):
            v = getattr(self, attr)
            if v is not None and v <= 0:
                raise ConfigError(f"mode {self.name}: {attr} must be > 0")
        for attr in ("speed_city", "speed_suburb", "feeder_speed_city", "feeder_speed_suburb"):
            v = getattr(self, attr)
            if v is not None and v <= 0:
                raise ConfigError(f"mode {self.name}: {attr} must be > 0")
        if self.is_transit:
            h = self.require("design_headway")
            lo, hi = self.min_headway, self.max_headway
            if lo is not None and lo > h or hi is not None and hi < h:
                raise ConfigError(f"mode {self.name}: need min_headway <= design_headway <= max_headway")
        if self.is_infrastructure and not self.is_transit:
            raise ConfigError(f"mode {self.name}: infrastructure modes must be transit modes")


@dataclass(frozen=True)
class GlobalParams:
    walk_coeff: float = 2.0
    wait_coeff: float = 1.5
    vot: float = 16.5
    budget: float = 0.0
    big_m: Optional[float] = None
    sav_start_cap: float = 5000.0
    sav_end_cap: float = 5000.0
    sav_link_cap: float = 2000.0
    sav_fleet: float = 20000.0
    sav_util: float = 0.7
    walk_speed: float = 4.0
    transfer_default: float = 5.0 / 60.0
    transfer_times: Mapping[tuple, float] = field(default_factory=dict)
    n_adj: int = 10
    n_direct: int = 5

    def transfer_time(self, m1: str, m2: str) -> float:
        return self.transfer_times.get((m1, m2), self.transfer_default)

    def validate(self) -> None:
        if self.walk_coeff < 1 or self.wait_coeff < 1:
            raise ConfigError("walk_coeff and wait_coeff must be >= 1")
        if self.budget < 0:
            raise ConfigError("budget must be >= 0")


# field -> dimension, used when reading profiles
_MODE_DIMS = {
    "station_spacing": "length",
    "infra_cost": "money/length",
    "op_cost": "money/time",
    "em_cost": "money/length",
    "feeder_op_cost": "money/time",
    "feeder_em_cost": "money/length",
    "design_headway": "time",
    "min_headway": "time",
    "max_headway": "time",
    "detour": "count",
    "feeder_detour": "count",
    "design_occ": "count",
    "feeder_design_occ": "count",
    "min_occ": "count",
    "max_occ": "count",
    "walk_access_time": "time",
    "dwell": "time",
    "feeder_dwell": "time",
    "speed_city": "speed",
    "speed_suburb": "speed",
    "feeder_speed_city": "speed",
    "feeder_speed_suburb": "speed",
    "wait": "time",
    "feeder_wait": "time",
}

_GLOBAL_DIMS = {
    "walk_coeff": "count",
    "wait_coeff": "count",
    "vot": "money/time",
    "budget": "money",
    "big_m": "count",
    "sav_start_cap": "rate",
    "sav_end_cap": "rate",
    "sav_link_cap": "rate",
    "sav_fleet": "count",
    "sav_util": "count",
    "walk_speed": "speed",
    "transfer_default": "time",
}


@dataclass(frozen=True)
class Profile:
    """A full parameter set: globals plus an ordered tuple of modes."""

    globals: GlobalParams
    modes: tuple

    def mode(self, name: str) -> ModeSpec:
        for m in self.modes:
            if m.name == name:
                return m
        raise KeyError(name)

    def select(self, names) -> "Profile":
        names = list(names)
        unknown = [n for n in names if n not in {m.name for m in self.modes}]
        if unknown:
            raise ConfigError(f"unknown modes: {unknown}")
        return Profile(self.globals, tuple(m for m in self.modes if m.name in names))

    def replace_globals(self, **changes) -> "Profile":
        return Profile(dataclasses.replace(self.globals, **changes), self.modes)


def _mode_from_table(name: str, table: Mapping) -> ModeSpec:
    kwargs = {"name": name}
    for key, raw in table.items():
        if key in ("is_transit", "is_infrastructure"):
            kwargs[key] = bool(raw)
        elif key in _MODE_DIMS:
            kwargs[key] = parse_quantity(raw, _MODE_DIMS[key], f"mode.{name}.{key}")
        else:
            raise ConfigError(f"mode.{name}: unknown field {key!r}")
    for key in ("op_cost", "em_cost", "feeder_op_cost", "feeder_em_cost", "detour", "feeder_detour"):
        if kwargs.get(key, 0) is None:
            kwargs[key] = ModeSpec.__dataclass_fields__[key].default
    spec = ModeSpec(**kwargs)
    spec.validate()
    return spec


def profile_from_dict(doc: Mapping) -> Profile:
    gtable = dict(doc.get("globals", {}))
    transfers = gtable.pop("transfer", {})
    gkw = {}
    for key, raw in gtable.items():
        if key in ("n_adj", "n_direct"):
            gkw[key] = int(raw)
        elif key in _GLOBAL_DIMS:
            gkw[key] = parse_quantity(raw, _GLOBAL_DIMS[key], f"globals.{key}")
        else:
            raise ConfigError(f"globals: unknown field {key!r}")
    times = {}
    for pair, raw in transfers.items():
        m1, sep, m2 = pair.partition(">")
        if not sep:
            raise ConfigError(f"globals.transfer: key {pair!r} must look like 'M1>M2'")
        times[(m1.strip(), m2.strip())] = parse_quantity(raw, "time", f"globals.transfer.{pair}")
    g = GlobalParams(transfer_times=times, **gkw)
    g.validate()
    modes_table = doc.get("mode", {})
    if not modes_table:
        raise ConfigError("profile defines no [mode.NAME] sections")
    order = [n for n in MODE_ORDER if n in modes_table] + sorted(
        n for n in modes_table if n not in MODE_ORDER)
    modes = tuple(_mode_from_table(n, modes_table[n]) for n in order)
    return Profile(g, modes)


def load_profile(path=None) -> Profile:
    """Read a profile file; ``None`` loads the bundled default profile."""
    if path is None:
        text = resources.files("mmtransit").joinpath("data/defaults.profile").read_text()
    else:
        text = Path(path).read_text()
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"profile {path or 'defaults'}: {exc}") from None
    return profile_from_dict(doc)


def default_profile() -> Profile:
    return load_profile(None)
