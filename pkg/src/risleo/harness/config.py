"""Scenario configuration: a flat ``section.key = value`` text format.

Values are JSON literals (numbers, strings, booleans, lists). ``#`` starts a
comment. Every key must appear in :data:`SCHEMA`; missing keys take the
preset's value.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..ao import MODES, AoSettings
from ..bisection import SolverSettings
from ..channel import CASCADE_MODELS, RAIN_MODELS, ArrayGeometry, LinkBudgetParams
from ..geometry import STRATEGIES, ConstellationSpec, project_to_surface
from ..scene import RAIN_CADENCES
from ..trajectory import UavModel


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ValidationError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass(frozen=True)
class Field:
    kind: str  # int, float, str, bool, vec2, vec3, list
    doc: str
    choices: tuple = ()
    minimum: float | None = None
    exclusive: bool = False


def _f(doc, minimum=None, exclusive=False):
    return Field("float", doc, minimum=minimum, exclusive=exclusive)


def _i(doc, minimum=None):
    return Field("int", doc, minimum=minimum)


SCHEMA: dict[str, Field] = {
    "constellation.orbital_altitude": _f("shell altitude, m", 0, True),
    "constellation.num_planes": _i("orbital planes", 1),
    "constellation.sats_per_plane": _i("satellites per plane", 1),
    "constellation.inclination_deg": _f("inclination, degrees", 0, True),
    "constellation.phase_factor": _i("Walker phasing factor", 0),
    "constellation.min_elevation_deg": _f("minimum elevation, degrees", 0),
    "region.center": Field("vec3", "region centre, Earth-centred m (projected to the surface)"),
    "region.x_range": Field("vec2", "east extent of the UE drop area, local m"),
    "region.y_range": Field("vec2", "north extent of the UE drop area, local m"),
    "group.size": _i("cooperating satellites S", 1),
    "group.strategy": Field("str", "group selection rule", choices=STRATEGIES),
    "link.carrier_frequency": _f("carrier, Hz", 0, True),
    "link.bandwidth": _f("bandwidth, Hz", 0, True),
    "link.gain_over_temperature_db": _f("UE G/T, dB/K"),
    "link.noise_temperature": _f("noise temperature, K", 0, True),
    "link.rain_mean_db": _f("rain location parameter"),
    "link.rain_var_db": _f("rain scale parameter squared", 0),
    "link.rain_model": Field("str", "rain distribution", choices=RAIN_MODELS),
    "link.sat_gain_max_dbi": _f("satellite peak gain, dBi"),
    "link.three_db_angle_deg": _f("satellite 3 dB angle, degrees", 0, True),
    "link.rician_direct": _f("direct-link Rician factor", 0, True),
    "link.rician_sat_ris": _f("satellite-to-RIS Rician factor", 0, True),
    "link.rician_ris_ue": _f("RIS-to-UE Rician factor", 0, True),
    "link.cascade_model": Field("str", "cascade NLoS scale", choices=CASCADE_MODELS),
    "arrays.sat_nx": _i("satellite array columns", 1),
    "arrays.sat_ny": _i("satellite array rows", 1),
    "arrays.ris_elements": _i("RIS elements M_r", 1),
    "power.sat_dbm": _f("per-satellite transmit power, dBm"),
    "uav.altitude": _f("flight altitude, m", 0, True),
    "uav.v_max": _f("maximum speed, m/s", 0),
    "uav.l_max": _f("maximum distance from the station, m", 0, True),
    "uav.e_max": _f("battery energy, J", 0, True),
    "uav.blade_power": _f("hover blade-profile power, W", 0, True),
    "uav.induced_power": _f("hover induced power, W", 0, True),
    "uav.induced_velocity": _f("mean rotor induced velocity, m/s", 0, True),
    "uav.blade_angular_velocity": _f("blade angular velocity, rad/s", 0, True),
    "uav.blade_radius": _f("blade radius, m", 0, True),
    "uav.fuselage_drag": _f("fuselage drag ratio", 0, True),
    "uav.rotor_solidity": _f("rotor solidity", 0, True),
    "uav.disc_area": _f("rotor disc area, m^2", 0, True),
    "uav.air_density": _f("air density, kg/m^3", 0, True),
    "ue.count": _i("number of UEs K", 1),
    "ue.positions": Field("list", "explicit local [x, y] per UE; empty draws them in the region"),
    "ue.velocity": Field("vec2", "common UE velocity, local m/s"),
    "frame.duration": _f("frame length T, s", 0, True),
    "frame.slots": _i("slots per frame N", 1),
    "solver.bisection_accuracy": _f("bisection accuracy, bit/s/Hz", 0, True),
    "solver.rank_one_tol": _f("relative rank-one threshold", 0, True),
    "solver.max_inner": _i("penalty iterations per bisection point", 1),
    "solver.conic_tol": _f("conic solver tolerance", 0, True),
    "solver.max_solver_iter": _i("conic solver iteration cap", 1),
    "solver.convergence_threshold": _f("outer-loop convergence threshold, bit/s/Hz", 0),
    "solver.max_outer": _i("outer-loop iteration cap", 1),
    "run.seed": _i("master seed", 0),
    "run.mode": Field("str", "scheme", choices=MODES),
    "run.rain_cadence": Field("str", "rain redraw cadence", choices=RAIN_CADENCES),
}

_TABLE_II: dict[str, Any] = {
    "constellation.orbital_altitude": 550e3,
    "constellation.num_planes": 36,
    "constellation.sats_per_plane": 22,
    "constellation.inclination_deg": 53.0,
    "constellation.phase_factor": 1,
    "constellation.min_elevation_deg": 10.0,
    "region.center": [-2.6610e6, 4.5050e6, -1.7249e6],
    "region.x_range": [-150.0, 150.0],
    "region.y_range": [150.0, 350.0],
    "group.size": 3,
    "group.strategy": "scenario_group",
    "link.carrier_frequency": 30e9,
    "link.bandwidth": 25e6,
    "link.gain_over_temperature_db": 34.0,
    "link.noise_temperature": 300.0,
    "link.rain_mean_db": -2.6,
    "link.rain_var_db": 1.63,
    "link.rain_model": "lognormal_db",
    "link.sat_gain_max_dbi": 20.0,
    "link.three_db_angle_deg": 0.4,
    "link.rician_direct": 30.0,
    "link.rician_sat_ris": 30.0,
    "link.rician_ris_ue": 10.0,
    "link.cascade_model": "literal",
    "arrays.sat_nx": 4,
    "arrays.sat_ny": 4,
    "arrays.ris_elements": 100,
    "power.sat_dbm": 40.0,
    "uav.altitude": 100.0,
    "uav.v_max": 5.0,
    "uav.l_max": 200.0,
    "uav.e_max": 100e3,
    "uav.blade_power": 79.86,
    "uav.induced_power": 88.63,
    "uav.induced_velocity": 4.03,
    "uav.blade_angular_velocity": 300.0,
    "uav.blade_radius": 0.4,
    "uav.fuselage_drag": 0.6,
    "uav.rotor_solidity": 0.05,
    "uav.disc_area": 0.503,
    "uav.air_density": 1.225,
    "ue.count": 6,
    "ue.positions": [],
    "ue.velocity": [0.0, 0.0],
    "frame.duration": 60.0,
    "frame.slots": 60,
    "solver.bisection_accuracy": 1e-3,
    "solver.rank_one_tol": 1e-6,
    "solver.max_inner": 15,
    "solver.conic_tol": 1e-8,
    "solver.max_solver_iter": 200,
    "solver.convergence_threshold": 1e-3,
    "solver.max_outer": 10,
    "run.seed": 0,
    "run.mode": "full_ao",
    "run.rain_cadence": "frame",
}

_DESK = dict(
    _TABLE_II,
    **{
        "group.size": 2,
        "arrays.sat_nx": 2,
        "arrays.sat_ny": 2,
        "arrays.ris_elements": 16,
        "ue.count": 3,
        "frame.duration": 10.0,
        "frame.slots": 10,
    },
)

PRESETS: dict[str, dict[str, Any]] = {"table2": _TABLE_II, "desk": _DESK}
assert all(set(p) == set(SCHEMA) for p in PRESETS.values())


def _coerce(key: str, value: Any) -> Any:
    spec = SCHEMA[key]
    kind = spec.kind
    if kind == "int":
        if isinstance(value, bool) or not (isinstance(value, int) or (isinstance(value, float) and value.is_integer())):
            raise ValidationError(key, f"expected an integer, got {value!r}")
        value = int(value)
    elif kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(key, f"expected a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            raise ValidationError(key, "must be finite")
    elif kind == "str":
        if not isinstance(value, str):
            raise ValidationError(key, f"expected a string, got {value!r}")
        if spec.choices and value not in spec.choices:
            raise ValidationError(key, f"must be one of {list(spec.choices)}")
    elif kind == "bool":
        if not isinstance(value, bool):
            raise ValidationError(key, f"expected true or false, got {value!r}")
    elif kind in ("vec2", "vec3"):
        n = 2 if kind == "vec2" else 3
        if not isinstance(value, list) or len(value) != n or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        ):
            raise ValidationError(key, f"expected a list of {n} numbers, got {value!r}")
        value = [float(v) for v in value]
    elif kind == "list":
        if not isinstance(value, list):
            raise ValidationError(key, f"expected a list, got {value!r}")
        out = []
        for i, item in enumerate(value):
            if not isinstance(item, list) or len(item) != 2:
                raise ValidationError(f"{key}[{i}]", "expected [x, y]")
            out.append([float(v) for v in item])
        value = out
    if spec.minimum is not None and kind in ("int", "float"):
        if value < spec.minimum or (spec.exclusive and value == spec.minimum):
            op = ">" if spec.exclusive else ">="
            raise ValidationError(key, f"must be {op} {spec.minimum}")
    return value


def parse_text(text: str) -> dict[str, Any]:
    """Parse the key-value format into a dict of raw JSON values."""
    values: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", lineno)
        key, _, literal = line.partition("=")
        key, literal = key.strip(), literal.strip()
        if not key or not literal:
            raise ParseError("empty key or value", lineno)
        if key in values:
            raise ParseError(f"duplicate key {key!r}", lineno)
        try:
            values[key] = json.loads(literal)
        except json.JSONDecodeError as exc:
            raise ParseError(f"value of {key!r} is not a JSON literal ({exc.msg})", lineno) from None
    return values


def _near_square(n: int) -> tuple[int, int]:
    nx = int(math.isqrt(n))
    while n % nx:
        nx -= 1
    return nx, n // nx


@dataclass(frozen=True)
class ScenarioConfig:
    values: dict[str, Any] = field(default_factory=dict)
    preset: str = "table2"

    # construction ----------------------------------------------------------
    @classmethod
    def from_values(cls, overrides: dict[str, Any] | None = None, preset: str = "table2") -> "ScenarioConfig":
        if preset not in PRESETS:
            raise ValidationError("preset", f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        merged = dict(PRESETS[preset])
        for key, value in (overrides or {}).items():
            if key not in SCHEMA:
                raise ValidationError(key, "unknown key")
            merged[key] = value
        coerced = {k: _coerce(k, merged[k]) for k in sorted(merged)}
        cfg = cls(coerced, preset)
        cfg.validate()
        return cfg

    def with_overrides(self, overrides: dict[str, Any]) -> "ScenarioConfig":
        return ScenarioConfig.from_values({**self.values, **overrides}, self.preset)

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def validate(self) -> None:
        v = self.values
        if v["constellation.phase_factor"] >= v["constellation.num_planes"]:
            raise ValidationError("constellation.phase_factor", "must be below constellation.num_planes")
        if v["constellation.inclination_deg"] > 90.0:
            raise ValidationError("constellation.inclination_deg", "must not exceed 90")
        if v["constellation.min_elevation_deg"] >= 90.0:
            raise ValidationError("constellation.min_elevation_deg", "must be below 90")
        if v["link.three_db_angle_deg"] >= 90.0:
            raise ValidationError("link.three_db_angle_deg", "must be below 90")
        for key in ("region.x_range", "region.y_range"):
            if v[key][0] > v[key][1]:
                raise ValidationError(key, "lower end exceeds upper end")
        if v["uav.altitude"] > v["uav.l_max"]:
            raise ValidationError("uav.altitude", "exceeds uav.l_max")
        antennas = v["arrays.sat_nx"] * v["arrays.sat_ny"] * self.S
        if v["ue.count"] > antennas:
            raise ValidationError("ue.count", f"{v['ue.count']} UEs exceed the {antennas} transmit antennas")
        if v["ue.positions"] and len(v["ue.positions"]) != v["ue.count"]:
            raise ValidationError("ue.positions", "needs one entry per UE")
        slot = v["frame.duration"] / v["frame.slots"]
        if not math.isclose(slot * v["frame.slots"], v["frame.duration"], rel_tol=1e-12):
            raise ValidationError("frame.slots", "slot duration times slot count must equal the frame")

    # derived objects -------------------------------------------------------
    @property
    def S(self) -> int:
        return self.values["group.size"] if self.values["group.strategy"] == "scenario_group" else 1

    @property
    def K(self) -> int:
        return self.values["ue.count"]

    @property
    def n_slots(self) -> int:
        return self.values["frame.slots"]

    @property
    def slot_duration(self) -> float:
        return self.values["frame.duration"] / self.values["frame.slots"]

    @property
    def seed(self) -> int:
        return self.values["run.seed"]

    @property
    def mode(self) -> str:
        return self.values["run.mode"]

    @property
    def constellation(self) -> ConstellationSpec:
        v = self.values
        return ConstellationSpec(
            orbital_altitude=v["constellation.orbital_altitude"],
            num_planes=v["constellation.num_planes"],
            sats_per_plane=v["constellation.sats_per_plane"],
            inclination=math.radians(v["constellation.inclination_deg"]),
            phase_factor=v["constellation.phase_factor"],
            min_elevation=math.radians(v["constellation.min_elevation_deg"]),
        )

    @property
    def region_center(self) -> np.ndarray:
        return project_to_surface(self.values["region.center"])

    @property
    def link(self) -> LinkBudgetParams:
        v = self.values
        return LinkBudgetParams(
            carrier_frequency=v["link.carrier_frequency"],
            bandwidth=v["link.bandwidth"],
            gain_over_temperature_db=v["link.gain_over_temperature_db"],
            noise_temperature=v["link.noise_temperature"],
            rain_mean_db=v["link.rain_mean_db"],
            rain_var_db=v["link.rain_var_db"],
            rain_model=v["link.rain_model"],
            sat_gain_max_dbi=v["link.sat_gain_max_dbi"],
            three_db_angle=math.radians(v["link.three_db_angle_deg"]),
            rician_direct=v["link.rician_direct"],
            rician_sat_ris=v["link.rician_sat_ris"],
            rician_ris_ue=v["link.rician_ris_ue"],
            cascade_model=v["link.cascade_model"],
        )

    @property
    def sat_array(self) -> ArrayGeometry:
        return ArrayGeometry.half_wavelength(self.values["arrays.sat_nx"], self.values["arrays.sat_ny"], self.link.wavelength)

    @property
    def ris_array(self) -> ArrayGeometry:
        nx, ny = _near_square(self.values["arrays.ris_elements"])
        return ArrayGeometry.half_wavelength(nx, ny, self.link.wavelength)

    @property
    def p_max(self) -> np.ndarray:
        return np.full(self.S, 10.0 ** (self.values["power.sat_dbm"] / 10.0) / 1e3)

    @property
    def uav(self) -> UavModel:
        v = self.values
        return UavModel(
            altitude=v["uav.altitude"],
            v_max=v["uav.v_max"],
            l_max=v["uav.l_max"],
            slot_duration=self.slot_duration,
            blade_power=v["uav.blade_power"],
            induced_power=v["uav.induced_power"],
            induced_velocity=v["uav.induced_velocity"],
            blade_angular_velocity=v["uav.blade_angular_velocity"],
            blade_radius=v["uav.blade_radius"],
            fuselage_drag=v["uav.fuselage_drag"],
            rotor_solidity=v["uav.rotor_solidity"],
            disc_area=v["uav.disc_area"],
            air_density=v["uav.air_density"],
            e_max=v["uav.e_max"],
        )

    @property
    def solver(self) -> SolverSettings:
        v = self.values
        return SolverSettings(
            bisection_accuracy=v["solver.bisection_accuracy"],
            rank_one_tol=v["solver.rank_one_tol"],
            max_inner=v["solver.max_inner"],
            conic_tol=v["solver.conic_tol"],
            max_solver_iter=v["solver.max_solver_iter"],
        )

    @property
    def ao_settings(self) -> AoSettings:
        return AoSettings(
            convergence_threshold=self.values["solver.convergence_threshold"],
            max_outer=self.values["solver.max_outer"],
            solver=self.solver,
        )

    # serialisation ---------------------------------------------------------
    def to_text(self) -> str:
        lines = [f"# preset: {self.preset}"]
        section = None
        for key in sorted(self.values):
            head = key.split(".", 1)[0]
            if head != section:
                if section is not None:
                    lines.append("")
                section = head
            lines.append(f"{key} = {json.dumps(self.values[key])}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        payload = json.dumps(self.values, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()


def load_scenario(path: str | Path, preset: str | None = None) -> ScenarioConfig:
    """Read a config file; keys it omits come from ``preset``.

    Without an explicit preset, a leading ``# preset: name`` line (as written
    by :func:`save_scenario`) is honoured, else the Table II values are used.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    values = parse_text(text)
    first = text.lstrip().splitlines()[0] if text.strip() else ""
    if preset is None:
        named = first.split(":", 1)[1].strip() if first.startswith("# preset:") else "table2"
        preset = named
    return ScenarioConfig.from_values(values, preset)


def save_scenario(config: ScenarioConfig, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(config.to_text())
    return path


def key_reference() -> str:
    """One line per key with its type and meaning, for the README and ``--help``."""
    width = max(map(len, SCHEMA))
    out = []
    for key, spec in SCHEMA.items():
        extra = f" {{{', '.join(spec.choices)}}}" if spec.choices else ""
        out.append(f"{key.ljust(width)}  {spec.kind:5s} {spec.doc}{extra}")
    return "\n".join(out)
