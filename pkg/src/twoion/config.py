"""Experiment configuration files.

A config is a YAML document with nested sections. Quantities are written as
``"<number> <unit>"`` strings (``"700 kHz"``, ``"3.7 um"``, ``"6 ms"``); a bare
number is read in the field's canonical unit. Frequencies are ordinary
frequencies at this boundary and become angular frequencies internally.

Parsing produces a normalized document (every field present, every quantity
in its canonical unit) which is what gets echoed into run outputs, so
``parse_config(echo_text(cfg))`` reproduces ``cfg``.
"""

from __future__ import annotations

import re
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .constants import TWO_PI
from .cooling import DopplerParams
from .crystal import (BeamGeometry, IonSpecies, ModeLabel, TrapConfig, TrapError,
                      mode_label)
from .measurement import DetectionConfig

EXPERIMENTS = ("SpectrumScan", "RabiScan", "CoolingSchedule", "HeatingScan",
               "HistogramRun", "HeatingAnalysis")

SECTION_FOR = {
    "SpectrumScan": "spectrum_scan",
    "RabiScan": "rabi_scan",
    "CoolingSchedule": "cooling_schedule",
    "HeatingScan": "heating_scan",
    "HistogramRun": "histogram_run",
    "HeatingAnalysis": "heating_analysis",
}

UNITS = {
    "frequency": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9},
    "length": {"nm": 1e-9, "um": 1e-6, "μm": 1e-6, "µm": 1e-6, "mm": 1e-3, "m": 1.0},
    "time": {"ns": 1e-9, "us": 1e-6, "μs": 1e-6, "µs": 1e-6, "ms": 1e-3, "s": 1.0},
    "rate": {"/s": 1.0, "1/s": 1.0, "/ms": 1e3, "1/ms": 1e3},
    "angle": {"deg": 1.0},
    "mass": {"amu": 1.0, "u": 1.0},
}

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[-+]?inf)\s*(\S*)\s*$")


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending entry."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
        self.message = message

    def as_dict(self) -> dict:
        return {"error": "config", "path": self.path, "message": self.message}


_REQUIRED = object()


@dataclass(frozen=True)
class Field:
    kind: str
    unit: str | None = None
    default: Any = _REQUIRED
    choices: tuple = ()


def _f(kind, unit=None, default=_REQUIRED, choices=()):
    return Field(kind, unit, default, choices)


COMMON_SCHEMA: dict[str, Any] = {
    "trap": {
        "axial_frequency": _f("frequency", "kHz"),
        "radial_frequency_x": _f("frequency", "MHz"),
        "radial_frequency_y": _f("frequency", "MHz", None),  # None: same as x
        "electrode_distance": _f("length", "mm", 1.18),
        "rf_drive": _f("frequency", "MHz", 16.0),
    },
    "species": {
        "mass": _f("mass", "amu", 40.0),
        "qubit_wavelength": _f("length", "nm", 729.0),
        "dipole_linewidth": _f("frequency", "MHz", 20.0),
    },
    "beam": {
        "angle_to_axis": _f("angle", "deg", 67.5),
        "waist": _f("length", "um", 3.7),
        "center_offset": _f("length", "um", 0.0),
        "peak_rabi": _f("frequency", "kHz", 100.0),
    },
    "detection": {
        "window": _f("time", "ms", 11.8),
        "background_mean": _f("number", None, 19.0),
        "per_ion_bright_mean": _f("number", None, 30.0),
        "thresholds": _f("thresholds", None, "auto"),
    },
    "doppler": {
        "gamma_eff": _f("frequency", "MHz", 30.0),
        "geometry_factor": _f("number", None, 2.1),
    },
}

DEFAULT_HEATING = {
    "AxialCOM": 10.0, "Breathing": 10.0,
    "RadialCOM_x": 25.0, "RadialCOM_y": 25.0,
    "Rocking_x": 8.0, "Rocking_y": 8.0,
}

EXPERIMENT_SCHEMA: dict[str, dict[str, Field]] = {
    "spectrum_scan": {
        "detuning_start": _f("frequency", "kHz", -2500.0),
        "detuning_stop": _f("frequency", "kHz", 2500.0),
        "points": _f("int", None, 2001),
        "probe_rabi": _f("frequency", "kHz", 50.0),
        "probe_duration": _f("time", "us", 30.0),
        "initial": _f("initial", None, "doppler"),
    },
    "rabi_scan": {
        "transition": _f("choice", None, "carrier", ("carrier", "red", "blue")),
        "mode": _f("mode", None, "AxialCOM"),
        "rabi": _f("frequency", "kHz", 100.0),
        "detuning": _f("frequency", "kHz", 0.0),
        "time_start": _f("time", "us", 0.0),
        "time_stop": _f("time", "us", 200.0),
        "points": _f("int", None, 401),
        "initial": _f("initial", None, {"AxialCOM": 0.05, "Breathing": 0.47, "Rocking": 0.65,
                                         "RadialCOM": 2.3}),
        "two_ion": _f("bool", None, False),
        "rabi_ion1": _f("frequency", "kHz", None),  # None: from beam profile
        "rabi_ion2": _f("frequency", "kHz", None),
        "coherence_time": _f("time", "us", None),  # None: no dephasing
    },
    "cooling_schedule": {
        "order": _f("mode_list", None, ["RadialCOM_x", "Rocking_x", "Breathing", "AxialCOM"]),
        "pulse_duration": _f("time", "ms", 6.0),
        "initial": _f("initial", None, "doppler"),
        "heating_rates": _f("rate_map", "/s", dict(DEFAULT_HEATING)),
        "cool_rates": _f("rate_map", "/ms", None),
        "targets": _f("number_map", None, None),
        "probe_rabi": _f("frequency", "kHz", 2.0),
        "probe_duration": _f("time", "us", 400.0),
    },
    "heating_scan": {
        "mode": _f("mode", None, "Breathing"),
        "heating_rate": _f("rate", "/s", 10.0),
        "initial_n_bar": _f("number", None, 0.0),
        "delays": _f("time_list", "ms", [0.0, 25.0, 50.0, 75.0, 100.0]),
        "measurement_noise": _f("number", None, 0.0),
    },
    "histogram_run": {
        "p_dark": _f("probabilities", None, [0.5, 0.5]),
        "shots": _f("int", None, 10000),
    },
    "heating_analysis": {
        "records": _f("str", None, "builtin"),
        "checks": _f("checks", None, []),
    },
}

TOP_LEVEL = {"experiment", "seed", *COMMON_SCHEMA, *EXPERIMENT_SCHEMA}

CHECK_KEYS = {"name", "ion", "trap", "com_only", "include_limits", "reference", "reference_sigma"}


def _quantity(path: str, value, kind: str, unit: str) -> float:
    table = UNITS[kind]
    if isinstance(value, bool):
        raise ConfigError(path, f"expected a {kind}, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(path, f"expected a {kind} like '1.0 {unit}', got {value!r}")
    m = _QUANTITY.match(value)
    if not m:
        raise ConfigError(path, f"cannot read {value!r} as a {kind}")
    number, given = float(m.group(1)), m.group(2) or unit
    if given not in table:
        raise ConfigError(path, f"unit {given!r} is not a {kind} unit (expected one of {sorted(table)})")
    return number * table[given] / table[unit]


def _number(path, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    return float(value)


def _mode_map(path, value, convert) -> dict[str, float]:
    if not isinstance(value, Mapping):
        raise ConfigError(path, "expected a mapping from mode name to value")
    out = {}
    for key, v in value.items():
        sub = f"{path}.{key}"
        labels = _expand_mode_key(sub, key)
        for label in labels:
            out[label.value] = convert(sub, v)
    return {k: out[k] for k in sorted(out, key=_mode_order)}


def _expand_mode_key(path, key) -> list[ModeLabel]:
    # in maps the bare radial names cover both radial directions
    k = str(key)
    if k in ("radial", "RadialCOM"):
        return [ModeLabel.RADIAL_COM_X, ModeLabel.RADIAL_COM_Y]
    if k in ("rocking", "Rocking"):
        return [ModeLabel.ROCKING_X, ModeLabel.ROCKING_Y]
    try:
        return [mode_label(k)]
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


def _mode_order(name: str) -> int:
    return [m.value for m in ModeLabel].index(name)


def _normalize_field(path: str, fld: Field, value):
    kind = fld.kind
    if value is None:
        return None
    if kind in UNITS:
        return _quantity(path, value, kind, fld.unit)
    if kind == "number":
        return _number(path, value)
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return int(value)
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected true or false, got {value!r}")
        return value
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    if kind == "choice":
        if value not in fld.choices:
            raise ConfigError(path, f"expected one of {list(fld.choices)}, got {value!r}")
        return value
    if kind == "mode":
        try:
            return mode_label(value).value
        except ValueError as exc:
            raise ConfigError(path, str(exc)) from None
    if kind == "mode_list":
        if not isinstance(value, list) or not value:
            raise ConfigError(path, "expected a non-empty list of mode names")
        return [_normalize_field(f"{path}[{i}]", Field("mode"), v) for i, v in enumerate(value)]
    if kind == "rate_map":
        return _mode_map(path, value, lambda p, v: _quantity(p, v, "rate", fld.unit))
    if kind == "number_map":
        return _mode_map(path, value, _number)
    if kind == "initial":
        if value == "doppler":
            return "doppler"
        return _mode_map(path, value, _number)
    if kind == "time_list":
        if not isinstance(value, list) or not value:
            raise ConfigError(path, "expected a non-empty list of times")
        return [_quantity(f"{path}[{i}]", v, "time", fld.unit) for i, v in enumerate(value)]
    if kind == "probabilities":
        if not isinstance(value, list):
            raise ConfigError(path, "expected a list of probabilities")
        out = [_number(f"{path}[{i}]", v) for i, v in enumerate(value)]
        if any(not 0 <= p <= 1 for p in out):
            raise ConfigError(path, "probabilities must lie in [0, 1]")
        return out
    if kind == "thresholds":
        if value == "auto":
            return "auto"
        if (not isinstance(value, list) or len(value) != 2
                or not all(isinstance(v, int) and not isinstance(v, bool) for v in value)):
            raise ConfigError(path, "expected 'auto' or a list of two integer counts")
        if not value[0] < value[1]:
            raise ConfigError(path, "thresholds must be increasing")
        return list(value)
    if kind == "checks":
        if not isinstance(value, list):
            raise ConfigError(path, "expected a list of checks")
        out = []
        for i, item in enumerate(value):
            sub = f"{path}[{i}]"
            if not isinstance(item, Mapping):
                raise ConfigError(sub, "expected a mapping")
            unknown = set(item) - CHECK_KEYS
            if unknown:
                raise ConfigError(f"{sub}.{sorted(unknown)[0]}", "unknown key")
            for need in ("name", "reference", "reference_sigma"):
                if need not in item:
                    raise ConfigError(f"{sub}.{need}", "missing required field")
            out.append({
                "name": str(item["name"]),
                "ion": None if item.get("ion") is None else str(item["ion"]),
                "trap": None if item.get("trap") is None else str(item["trap"]),
                "com_only": bool(item.get("com_only", False)),
                "include_limits": bool(item.get("include_limits", False)),
                "reference": _number(f"{sub}.reference", item["reference"]),
                "reference_sigma": _number(f"{sub}.reference_sigma", item["reference_sigma"]),
            })
        return out
    raise AssertionError(kind)


def _normalize_section(path: str, schema: Mapping[str, Field], raw) -> dict:
    if raw is None:
        raw = {}
    if not isinstance(raw, Mapping):
        raise ConfigError(path, "expected a section (mapping)")
    unknown = set(raw) - set(schema)
    if unknown:
        key = sorted(map(str, unknown))[0]
        raise ConfigError(f"{path}.{key}", f"unknown key (allowed: {sorted(schema)})")
    out = {}
    for key, fld in schema.items():
        sub = f"{path}.{key}"
        if key in raw:
            out[key] = _normalize_field(sub, fld, raw[key])
        elif fld.default is _REQUIRED:
            raise ConfigError(sub, "missing required field")
        else:
            default = fld.default
            out[key] = _normalize_field(sub, fld, default) if default is not None else None
    return out


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int | None
    trap: TrapConfig
    species: IonSpecies
    beam: BeamGeometry
    detection: DetectionConfig
    doppler: DopplerParams
    params: dict  # experiment section, canonical units
    document: dict = field(repr=False)  # normalized document for echo
    base_dir: Path | None = field(default=None, repr=False, compare=False)

    @property
    def section(self) -> str:
        return SECTION_FOR[self.experiment]


def _hz(x):
    return TWO_PI * x


def normalize_document(raw: Mapping) -> dict:
    if not isinstance(raw, Mapping):
        raise ConfigError("", "config must be a mapping of sections")
    unknown = set(raw) - TOP_LEVEL
    if unknown:
        raise ConfigError(sorted(map(str, unknown))[0], "unknown top-level key")
    if "experiment" not in raw:
        raise ConfigError("experiment", "missing required field")
    experiment = raw["experiment"]
    if experiment not in EXPERIMENTS:
        raise ConfigError("experiment", f"expected one of {list(EXPERIMENTS)}, got {experiment!r}")
    seed = raw.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or seed < 0):
        raise ConfigError("seed", "expected a non-negative integer")
    section = SECTION_FOR[experiment]
    for other in EXPERIMENT_SCHEMA:
        if other != section and other in raw:
            raise ConfigError(other, f"section does not apply to experiment {experiment}")
    doc = {"experiment": experiment, "seed": seed}
    for name, schema in COMMON_SCHEMA.items():
        doc[name] = _normalize_section(name, schema, raw.get(name))
    doc[section] = _normalize_section(section, EXPERIMENT_SCHEMA[section], raw.get(section))
    if doc["trap"]["radial_frequency_y"] is None:
        doc["trap"]["radial_frequency_y"] = doc["trap"]["radial_frequency_x"]
    return doc


def _build(doc: dict, base_dir) -> ExperimentConfig:
    t, s, b, d, dp = (doc[k] for k in ("trap", "species", "beam", "detection", "doppler"))
    try:
        trap = TrapConfig(
            omega_axial=_hz(t["axial_frequency"] * 1e3),
            omega_radial_x=_hz(t["radial_frequency_x"] * 1e6),
            omega_radial_y=_hz(t["radial_frequency_y"] * 1e6),
            electrode_distance_mm=t["electrode_distance"],
            rf_drive=_hz(t["rf_drive"] * 1e6),
        )
    except TrapError as exc:
        raise ConfigError("trap", str(exc)) from None
    try:
        species = IonSpecies(s["mass"], s["qubit_wavelength"] * 1e-9, _hz(s["dipole_linewidth"] * 1e6))
    except ValueError as exc:
        raise ConfigError("species", str(exc)) from None
    try:
        beam = BeamGeometry(b["angle_to_axis"], b["waist"] * 1e-6, b["center_offset"] * 1e-6,
                            _hz(b["peak_rabi"] * 1e3))
    except ValueError as exc:
        raise ConfigError("beam", str(exc)) from None
    try:
        thresholds = None if d["thresholds"] == "auto" else tuple(d["thresholds"])
        detection = DetectionConfig(d["window"] * 1e-3, d["background_mean"], d["per_ion_bright_mean"],
                                    thresholds)
        if thresholds is None and not detection.degenerate:
            detection = detection.with_auto_thresholds()
    except ValueError as exc:
        raise ConfigError("detection", str(exc)) from None
    try:
        doppler = DopplerParams(_hz(dp["gamma_eff"] * 1e6), dp["geometry_factor"])
    except ValueError as exc:
        raise ConfigError("doppler", str(exc)) from None
    experiment = doc["experiment"]
    params = doc[SECTION_FOR[experiment]]
    _check_params(experiment, params, doc["seed"])
    return ExperimentConfig(experiment, doc["seed"], trap, species, beam, detection, doppler,
                            params, doc, Path(base_dir) if base_dir else None)


def _check_params(experiment: str, p: dict, seed) -> None:
    sec = SECTION_FOR[experiment]
    initial = p.get("initial")
    if isinstance(initial, dict):
        missing = [m.value for m in ModeLabel if m.value not in initial]
        if missing:
            raise ConfigError(f"{sec}.initial.{missing[0]}",
                              "missing mean phonon number (every mode needs one)")
        if any(v < 0 for v in initial.values()):
            raise ConfigError(f"{sec}.initial", "mean phonon numbers must be non-negative")
    for key in ("points", "shots"):
        if key in p and p[key] < 1:
            raise ConfigError(f"{sec}.{key}", "must be at least 1")
    if experiment == "SpectrumScan":
        if not p["probe_duration"] > 0:
            raise ConfigError(f"{sec}.probe_duration", "must be positive")
    if experiment == "RabiScan":
        if p["time_stop"] < p["time_start"] or p["time_start"] < 0:
            raise ConfigError(f"{sec}.time_stop", "need 0 <= time_start <= time_stop")
        for key in ("rabi_ion1", "rabi_ion2", "coherence_time"):
            if p[key] is not None and p[key] < 0:
                raise ConfigError(f"{sec}.{key}", "must be non-negative")
    if experiment == "CoolingSchedule":
        if (p["cool_rates"] is None) == (p["targets"] is None):
            raise ConfigError(f"{sec}.cool_rates", "give exactly one of cool_rates or targets")
        table = p["cool_rates"] if p["cool_rates"] is not None else p["targets"]
        name = "cool_rates" if p["cool_rates"] is not None else "targets"
        for mode in p["order"]:
            if mode not in table:
                raise ConfigError(f"{sec}.{name}.{mode}", "missing entry for a mode in the order")
        if len(set(p["order"])) != len(p["order"]):
            raise ConfigError(f"{sec}.order", "a mode appears twice")
    if experiment == "HeatingScan":
        if any(t < 0 for t in p["delays"]):
            raise ConfigError(f"{sec}.delays", "delays must be non-negative")
        if p["measurement_noise"] > 0 and seed is None:
            raise ConfigError("seed", "a seed is required when measurement_noise > 0")
    if experiment == "HistogramRun":
        if seed is None:
            raise ConfigError("seed", "a seed is required for sampling experiments")
        if len(p["p_dark"]) != 2:
            raise ConfigError(f"{sec}.p_dark", "expected one probability per ion (two ions)")


def parse_config(text: str, base_dir: str | Path | None = None, seed: int | None = None) -> ExperimentConfig:
    """Parse and validate a YAML config; ``seed`` overrides the file's seed."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("", f"not valid YAML: {exc}") from None
    if raw is None:
        raise ConfigError("", "empty config")
    if seed is not None and isinstance(raw, dict):
        raw = {**raw, "seed": seed}
    doc = normalize_document(raw)
    return _build(doc, base_dir)


def _render(schema_field: Field, value):
    if value is None:
        return None
    kind = schema_field.kind
    if kind in UNITS:
        return f"{value!r} {schema_field.unit}"
    if kind == "rate_map":
        return {k: f"{v!r} {schema_field.unit}" for k, v in value.items()}
    if kind == "time_list":
        return [f"{v!r} {schema_field.unit}" for v in value]
    return value


def echo_document(cfg: ExperimentConfig) -> dict:
    """Normalized config with quantities rendered as unit strings."""
    doc = cfg.document
    out = {"experiment": doc["experiment"], "seed": doc["seed"]}
    for name, schema in COMMON_SCHEMA.items():
        out[name] = {k: _render(schema[k], v) for k, v in doc[name].items()}
    section = cfg.section
    out[section] = {k: _render(EXPERIMENT_SCHEMA[section][k], v) for k, v in doc[section].items()}
    return out


def echo_text(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(echo_document(cfg), sort_keys=False, allow_unicode=True)


def load_config(path: str | Path, seed: int | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc.strerror or exc}") from None
    return parse_config(text, base_dir=path.parent, seed=seed)
