"""
Scenario files: flat TOML with one level of tables.

::

    [system]      gamma_sigma, omega_drive, delta, gamma_phi
    [sensors]     omega1, omega2, gamma_filter, epsilon   (omega1/2 default to -delta/+delta)
    [homodyne]    f                                        (number or list)
    [tau]         min, max, count
    [omega]       min, max, count
    [sweep]       parameter, values                        (gamma_filter|delta|omega_drive|gamma_phi|f)
    [dephasing]   gamma_phi                                (list)
    [fit]         input, window, gamma_filter, select
    [output]      name, svg, log_y

Rates are in units of ``gamma_sigma`` (1 unless set explicitly). A table
given in a config file replaces the matching keys of a preset.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import InvalidParams
from .model import HomodyneFraction, SensorParams, SystemParams

SCHEMA = {
    "system": {"gamma_sigma", "omega_drive", "delta", "gamma_phi"},
    "sensors": {"omega1", "omega2", "gamma_filter", "epsilon"},
    "homodyne": {"f"},
    "tau": {"min", "max", "count"},
    "omega": {"min", "max", "count"},
    "sweep": {"parameter", "values"},
    "dephasing": {"gamma_phi"},
    "fit": {"input", "window", "gamma_filter", "select"},
    "output": {"name", "svg", "log_y"},
}
SWEEP_AXES = ("gamma_filter", "delta", "omega_drive", "gamma_phi", "f")


class ConfigError(InvalidParams):
    """A scenario file or preset cannot be turned into a valid scenario."""


@dataclass(frozen=True)
class Grid:
    min: float
    max: float
    count: int

    def __post_init__(self):
        if self.count < 2:
            raise ConfigError(f"grid count must be >= 2, got {self.count}")
        if not self.max > self.min:
            raise ConfigError(f"grid max ({self.max}) must exceed min ({self.min})")

    def points(self) -> np.ndarray:
        return np.linspace(self.min, self.max, self.count)


@dataclass(frozen=True)
class SensorSpec:
    """Sensor settings; missing frequencies track the side peaks at -delta and +delta."""

    omega1: float | None = None
    omega2: float | None = None
    gamma_filter: float = 10.0
    epsilon: float | None = None

    def resolve(self, p: SystemParams) -> tuple[SensorParams, SensorParams]:
        w1 = -p.delta if self.omega1 is None else self.omega1
        w2 = p.delta if self.omega2 is None else self.omega2
        return (SensorParams(w1, self.gamma_filter, self.epsilon),
                SensorParams(w2, self.gamma_filter, self.epsilon))


@dataclass(frozen=True)
class Scenario:
    system: SystemParams = field(default_factory=SystemParams)
    sensors: SensorSpec | None = None
    homodyne: tuple[HomodyneFraction, ...] = (HomodyneFraction(0.0),)
    tau: Grid | None = None
    omega: Grid | None = None
    sweep_parameter: str | None = None
    sweep_values: tuple[float, ...] = ()
    gamma_phi_list: tuple[float, ...] = ()
    fit_input: str | None = None
    fit_window: tuple[float, float] | None = None
    fit_gamma_filter: float | None = None
    fit_select: float | None = None
    name: str = "fluorcorr"
    svg: bool = False
    log_y: bool = False
    raw: dict = field(default_factory=dict, compare=False)

    def points(self) -> list[tuple[float | None, SystemParams, SensorSpec | None, HomodyneFraction]]:
        """Expand the sweep into ``(value, system, sensors, homodyne)`` tuples, in input order."""
        if self.sweep_parameter is None:
            return [(None, self.system, self.sensors, self.homodyne[0])]
        out = []
        for v in self.sweep_values:
            system, sensors, homodyne = self.system, self.sensors, self.homodyne[0]
            if self.sweep_parameter == "gamma_filter":
                sensors = replace(sensors or SensorSpec(), gamma_filter=v)
            elif self.sweep_parameter == "f":
                homodyne = HomodyneFraction(v)
            else:
                system = system.replace(**{self.sweep_parameter: v})
            out.append((v, system, sensors, homodyne))
        return out


def load_preset(name: str) -> dict:
    path = resources.files("fluorcorr") / "presets" / f"{name}.toml"
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(list_presets())}")
    return tomllib.loads(path.read_text())


def list_presets() -> list[str]:
    folder = resources.files("fluorcorr") / "presets"
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".toml"))


def load_file(path: str | Path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc


def merge(base: dict, override: dict) -> dict:
    out = {k: dict(v) for k, v in base.items()}
    for table, values in override.items():
        if not isinstance(values, dict):
            raise ConfigError(f"top-level key {table!r} must be a table")
        out.setdefault(table, {}).update(values)
    return out


def _grid(table: dict | None) -> Grid | None:
    if table is None:
        return None
    try:
        return Grid(float(table["min"]), float(table["max"]), int(table["count"]))
    except KeyError as exc:
        raise ConfigError(f"grid is missing {exc.args[0]!r}") from exc


def _as_list(value) -> list:
    return list(value) if isinstance(value, (list, tuple)) else [value]


def from_dict(raw: dict) -> Scenario:
    for table, values in raw.items():
        if table not in SCHEMA:
            raise ConfigError(f"unknown table [{table}]")
        if not isinstance(values, dict):
            raise ConfigError(f"[{table}] must be a table")
        unknown = set(values) - SCHEMA[table]
        if unknown:
            raise ConfigError(f"unknown keys in [{table}]: {', '.join(sorted(unknown))}")
        for key, value in values.items():
            if isinstance(value, dict):
                raise ConfigError(f"[{table}].{key}: nested tables are not allowed")
    try:
        system = SystemParams(**{k: float(v) for k, v in raw.get("system", {}).items()})
        sensors = None
        if "sensors" in raw:
            s = raw["sensors"]
            sensors = SensorSpec(
                omega1=None if "omega1" not in s else float(s["omega1"]),
                omega2=None if "omega2" not in s else float(s["omega2"]),
                gamma_filter=float(s.get("gamma_filter", 10.0)),
                epsilon=None if "epsilon" not in s else float(s["epsilon"]),
            )
            sensors.resolve(system)
        homodyne = tuple(HomodyneFraction(float(f)) for f in _as_list(raw.get("homodyne", {}).get("f", 0.0)))
        if not homodyne:
            raise ConfigError("[homodyne].f must not be empty")
        sweep = raw.get("sweep", {})
        parameter = sweep.get("parameter")
        values = tuple(float(v) for v in _as_list(sweep.get("values", [])))
        if parameter is not None:
            if parameter not in SWEEP_AXES:
                raise ConfigError(f"sweep parameter must be one of {SWEEP_AXES}, got {parameter!r}")
            if not values:
                raise ConfigError("[sweep].values must not be empty")
        fit = raw.get("fit", {})
        window = fit.get("window")
        if window is not None:
            if len(window) != 2 or not float(window[1]) > float(window[0]) >= 0:
                raise ConfigError("[fit].window must be [lo, hi] with 0 <= lo < hi")
            window = (float(window[0]), float(window[1]))
        output = raw.get("output", {})
        scenario = Scenario(
            system=system,
            sensors=sensors,
            homodyne=homodyne,
            tau=_grid(raw.get("tau")),
            omega=_grid(raw.get("omega")),
            sweep_parameter=parameter,
            sweep_values=values,
            gamma_phi_list=tuple(float(g) for g in _as_list(raw.get("dephasing", {}).get("gamma_phi", []))),
            fit_input=fit.get("input"),
            fit_window=window,
            fit_gamma_filter=None if "gamma_filter" not in fit else float(fit["gamma_filter"]),
            fit_select=None if "select" not in fit else float(fit["select"]),
            name=str(output.get("name", "fluorcorr")),
            svg=bool(output.get("svg", False)),
            log_y=bool(output.get("log_y", False)),
            raw=raw,
        )
        for _, p, _, _ in scenario.points():
            if scenario.sensors is not None:
                scenario.sensors.resolve(p)
    except ConfigError:
        raise
    except (InvalidParams, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if any(g < 0 for g in scenario.gamma_phi_list):
        raise ConfigError("dephasing rates must be >= 0")
    return scenario


def load(config: str | Path | None = None, preset: str | None = None) -> Scenario:
    raw: dict = {}
    if preset is not None:
        raw = load_preset(preset)
    if config is not None:
        raw = merge(raw, load_file(config))
    return from_dict(raw)
