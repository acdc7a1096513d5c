"""Scenario configuration: strict YAML schema with per-scenario defaults.

A config is a mapping with a required ``scenario`` key and optional
``model``, ``protocol``, ``numerics`` and ``output`` sections.  Every key
not listed in the scenario's schema is an error, so typos fail before any
computation starts.  ``twqfi list <scenario>`` prints the schema.
"""
import copy
import math
from dataclasses import dataclass

import numpy as np
import yaml


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


@dataclass(frozen=True)
class Key:
    default: object
    kind: str
    help: str


def _grid(start, stop, num):
    return [float(v) for v in np.linspace(start, stop, num)]


_PROTOCOL = {
    "dt": Key(1.0, "positive", "encoding duration"),
    "omega_op": Key(0.0, "float", "operating value of the encoded parameter"),
    "prep_step": Key(None, "positive?", "RK4 step for preparation (default duration/1000)"),
    "enc_step": Key(None, "positive?", "RK4 step for encoding (default dt/1000)"),
    "closed_form": Key(False, "bool", "use exact flows where a model provides one"),
}

_NUMERICS = {
    "n_trajectories": Key(100_000, "count", "trajectories per grid point"),
    "delta": Key(None, "positive?", "finite-difference step in the parameter (default 1e-4/dt or 1e-4)"),
    "seed": Key(20240611, "seed", "master seed; every grid point reuses it"),
    "workers": Key(1, "count", "worker threads"),
    "escape_threshold": Key(1e8, "positive", "|x| beyond which a trajectory counts as escaped"),
    "backend": Key(None, "backend?", "numba or numpy (default: TWQFI_BACKEND or numba)"),
}

SCENARIOS = {
    "flow-field": {
        "description": "trajectory subsample with d/domega arrows at t=0, t1 and rewound t=0 (OPO on vacuum)",
        "model": {
            "g": Key(1.0, "nonneg", "OPO gain rate"),
            "theta": Key(0.0, "float", "pump phase"),
            "alpha0": Key(0.0, "nonneg", "|alpha0| of the initial coherent state"),
            "vartheta": Key(0.0, "float", "phase of alpha0"),
        },
        "protocol": {"t1": Key([0.5], "grid", "preparation durations")},
        "numerics": {"n_trajectories": Key(2000, "count", "trajectories"),
                     "n_points": Key(200, "count", "trajectories written per panel")},
        "grid_column": "gt1",
        "rate_key": "g",
    },
    "opo-undepleted": {
        "description": "coherent state, undepleted OPO preparation, phase encoding; compares to the closed form",
        "model": {
            "g": Key(1.0, "nonneg", "OPO gain rate"),
            "theta": Key(0.0, "float", "pump phase"),
            "alpha0": Key(10.0, "nonneg", "|alpha0|"),
            "vartheta": Key(0.0, "float", "phase of alpha0"),
        },
        "protocol": {"t1": Key(_grid(0.0, 1.0, 5), "grid", "preparation durations")},
        "numerics": {"n_cut": Key(1000, "count", "Fock truncation for the oracle subcommand")},
        "grid_column": "gt1",
        "rate_key": "g",
    },
    "pump-depletion": {
        "description": "two-mode down-conversion with pump depletion, phase encoding on the cavity mode",
        "model": {
            "chi": Key(1.0, "nonneg", "coupling rate"),
            "theta": Key(0.0, "float", "pump phase"),
            "alpha0": Key(10.0, "nonneg", "|alpha0| of the cavity mode"),
            "vartheta": Key(0.0, "float", "phase of alpha0"),
            "beta0": Key(math.sqrt(1000.0), "nonneg", "initial pump amplitude (real)"),
        },
        "protocol": {"t1": Key(_grid(0.0, 0.08, 11), "grid", "preparation durations")},
        "numerics": {"n_cut": Key(30, "count", "Fock truncation per mode for the oracle subcommand")},
        "grid_column": "chi_t1",
        "rate_key": "chi",
    },
    "kerr": {
        "description": "Kerr preparation, displacement encoding; compares to the exact Fock oracle and the method of moments",
        "model": {
            "chi": Key(1.0, "nonneg", "Kerr rate"),
            "omega0": Key(None, "float?", "counter-rotation (default chi*|alpha0|^2)"),
            "alpha0": Key(4.0, "nonneg", "|alpha0|"),
            "vartheta": Key(0.0, "float", "phase of alpha0"),
        },
        "protocol": {"t1": Key(_grid(0.0, 0.07, 15), "grid", "preparation durations")},
        "numerics": {"n_cut": Key(80, "count", "Fock truncation for the oracle")},
        "grid_column": "chi_t1",
        "rate_key": "chi",
    },
}


def schema(name):
    """Full ``{section: {key: Key}}`` schema for a scenario."""
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}")
    s = SCENARIOS[name]
    return {
        "model": dict(s["model"]),
        "protocol": {**_PROTOCOL, **s["protocol"]},
        "numerics": {**_NUMERICS, **s["numerics"]},
        "output": {"path": Key(f"{name}.csv", "str", "CSV path, relative to the output directory")},
    }


def _coerce(value, kind, where):
    optional = kind.endswith("?")
    kind = kind.rstrip("?")
    if value is None:
        if optional:
            return None
        raise ConfigError(f"{where}: a value is required")
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if kind == "str":
        if not isinstance(value, str) or not value:
            raise ConfigError(f"{where}: expected a non-empty string")
        return value
    if kind == "backend":
        if value not in ("numba", "numpy"):
            raise ConfigError(f"{where}: expected numba or numpy, got {value!r}")
        return value
    if kind in ("count", "seed"):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        if (kind == "count" and value < 1) or value < 0:
            raise ConfigError(f"{where}: out of range: {value}")
        return int(value)
    if kind == "grid":
        if isinstance(value, dict):
            extra = set(value) - {"start", "stop", "num"}
            if extra or len(value) != 3:
                raise ConfigError(f"{where}: grid mapping needs exactly start, stop, num")
            num = _coerce(value["num"], "count", where + ".num")
            return _grid(_coerce(value["start"], "nonneg", where + ".start"),
                         _coerce(value["stop"], "nonneg", where + ".stop"), num)
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            value = [value]
        if not isinstance(value, list) or not value:
            raise ConfigError(f"{where}: expected a list of durations or start/stop/num")
        return [_coerce(v, "nonneg", f"{where}[{i}]") for i, v in enumerate(value)]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{where}: value must be finite")
    if kind == "nonneg" and value < 0:
        raise ConfigError(f"{where}: must be >= 0")
    if kind == "positive" and value <= 0:
        raise ConfigError(f"{where}: must be > 0")
    return value


def validate(raw):
    """Check ``raw`` against its scenario schema and fill in defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    if "scenario" not in raw:
        raise ConfigError("missing required key 'scenario'")
    name = raw["scenario"]
    sch = schema(name)
    unknown = set(raw) - {"scenario"} - set(sch)
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    cfg = {"scenario": name}
    for section, keys in sch.items():
        given = raw.get(section) or {}
        if not isinstance(given, dict):
            raise ConfigError(f"section {section!r} must be a mapping")
        unknown = set(given) - set(keys)
        if unknown:
            raise ConfigError(f"unknown keys in {section}: {sorted(unknown)}; allowed: {sorted(keys)}")
        cfg[section] = {
            k: _coerce(given.get(k, copy.deepcopy(spec.default)), spec.kind, f"{section}.{k}")
            for k, spec in keys.items()
        }
    return cfg


def load(path):
    with open(path, encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: not valid YAML: {exc}") from None
    return validate(raw)


def default_config(name):
    return validate({"scenario": name})


def describe_schema(name):
    """Human-readable schema listing for ``twqfi list <scenario>``."""
    lines = [f"{name}: {SCENARIOS[name]['description']}" if name in SCENARIOS else name]
    for section, keys in schema(name).items():
        lines.append(f"  {section}:")
        for k, spec in keys.items():
            default = spec.default
            if isinstance(default, list) and len(default) > 4:
                default = f"[{default[0]:g} .. {default[-1]:g}] ({len(default)} points)"
            lines.append(f"    {k:<18} {spec.kind:<10} default={default!s:<24} {spec.help}")
    return "\n".join(lines)
