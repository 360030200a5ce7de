"""Experiment configuration: JSON schema, validation and state building."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ConfigError
from .grid import TemporalGrid
from .states import (DensityMatrix, PureState, TwoPhotonPureState, gaussian_entangled_pair,
                     gaussian_pulse, mix, pure_to_density, state_from_dict, superpose)

CONFIG_SCHEMA_VERSION = 1
MODES = ("forward", "sample", "reconstruct-kirkwood", "reconstruct-wavefunction", "two-photon")

_GRID = {
    "type": "object",
    "additionalProperties": False,
    "required": ["n_points", "dt"],
    "properties": {
        "n_points": {"type": "integer", "minimum": 8},
        "dt": {"type": "number", "exclusiveMinimum": 0},
        "t_start": {"type": ["number", "null"]},
    },
}

_PULSE = {
    "type": "object",
    "additionalProperties": False,
    "required": ["width"],
    "properties": {
        "peak_time": {"type": "number"},
        "width": {"type": "number", "exclusiveMinimum": 0},
        "chirp": {"type": "number"},
        "carrier": {"type": "number"},
        "weight": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
    },
}

_STATE = {
    "oneOf": [
        {"type": "object", "additionalProperties": False, "required": ["family", "width"],
         "properties": {"family": {"const": "gaussian"}, **_PULSE["properties"]}},
        {"type": "object", "additionalProperties": False, "required": ["family", "pulses"],
         "properties": {"family": {"const": "superposition"},
                        "pulses": {"type": "array", "minItems": 1, "items": _PULSE}}},
        {"type": "object", "additionalProperties": False, "required": ["family", "components"],
         "properties": {"family": {"const": "mixture"},
                        "components": {"type": "array", "minItems": 1, "items": {
                            "type": "object", "additionalProperties": False,
                            "required": ["pulse", "probability"],
                            "properties": {"pulse": _PULSE,
                                           "probability": {"type": "number", "minimum": 0}}}}}},
        {"type": "object", "additionalProperties": False,
         "required": ["family", "sigma_minus", "sigma_plus"],
         "properties": {"family": {"const": "entangled_gaussian"},
                        "sigma_minus": {"type": "number", "exclusiveMinimum": 0},
                        "sigma_plus": {"type": "number", "exclusiveMinimum": 0}}},
        {"type": "object", "additionalProperties": False, "required": ["family", "path"],
         "properties": {"family": {"const": "file"}, "path": {"type": "string"}}},
        {"type": "object", "additionalProperties": False, "required": ["family", "state"],
         "properties": {"family": {"const": "inline"}, "state": {"type": "object"}}},
    ]
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "mode", "grid", "state"],
    "properties": {
        "schema_version": {"const": CONFIG_SCHEMA_VERSION},
        "mode": {"enum": list(MODES)},
        "seed": {"type": "integer"},
        "output_dir": {"type": "string"},
        "grid": _GRID,
        "grid_2": _GRID,
        "state": _STATE,
        "input_records": {"type": "string"},
        "settings": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "thetas": {"type": "array", "minItems": 1,
                           "items": {"type": "number", "minimum": 0, "maximum": 0.7853981633974484}},
                "theta2": {"type": "number", "minimum": 0, "maximum": 0.7853981633974484},
                "n_phi": {"type": "integer", "minimum": 1},
                "phis": {"type": "array", "minItems": 1, "items": {"type": "number"}},
                "reference_times": {"type": ["array", "null"], "items": {"type": "number"}},
                "reference_width": {"type": "number", "minimum": 0},
                "omegas": {"type": ["array", "null"], "items": {"type": "integer", "minimum": 0}},
                "omega_pair": {"type": "array", "items": {"type": "integer", "minimum": 0},
                               "minItems": 2, "maxItems": 2},
            },
        },
        "noise": {
            "type": "object",
            "additionalProperties": False,
            "required": ["total_pairs"],
            "properties": {
                "total_pairs": {"type": "number", "minimum": 1},
                "n_trials": {"type": "integer", "minimum": 100},
                "thetas": {"type": "array", "minItems": 1,
                           "items": {"type": "number", "exclusiveMinimum": 0,
                                     "maximum": 0.7853981633974484}},
            },
        },
    },
}


@dataclass
class ExperimentConfig:
    mode: str
    grid: TemporalGrid
    state_spec: dict
    raw: dict
    grid_2: TemporalGrid | None = None
    seed: int = 0
    output_dir: str = "out"
    thetas: list = field(default_factory=lambda: [np.pi / 4])
    theta2: float | None = None
    phis: list = field(default_factory=lambda: [0.0, np.pi / 2, np.pi, 3 * np.pi / 2])
    reference_times: list | None = None
    reference_width: float = 0.0
    omegas: list | None = None
    omega_pair: list | None = None
    noise: dict | None = None
    input_records: str | None = None
    base_dir: Path = Path(".")

    def build_state(self):
        return build_state(self.state_spec, self.grid, self.grid_2, self.base_dir)


def _key_path(err, prefix: str = "") -> str:
    out = prefix
    for p in err.absolute_path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def validate_config(raw: dict) -> None:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for e in errors:
            if e.validator == "oneOf":
                lines += _state_errors(e.instance)
            else:
                lines.append(f"key '{_key_path(e)}': {e.message}")
        raise ConfigError("invalid config:\n  " + "\n  ".join(lines))


def _state_errors(state) -> list[str]:
    """Diagnose a state block against the branch named by its family."""
    families = {b["properties"]["family"]["const"]: b for b in _STATE["oneOf"]}
    fam = state.get("family") if isinstance(state, dict) else None
    if fam not in families:
        return [f"key 'state.family': {fam!r} is not one of {sorted(families)}"]
    v = jsonschema.Draft202012Validator(families[fam])
    return [f"key '{_key_path(e, 'state')}': {e.message}"
            for e in sorted(v.iter_errors(state), key=lambda e: list(e.absolute_path))]


def config_from_dict(raw: dict, base_dir=".") -> ExperimentConfig:
    validate_config(raw)
    st = raw.get("settings", {})
    if "phis" in st and "n_phi" in st:
        raise ConfigError("key 'settings': give either 'phis' or 'n_phi', not both")
    if "phis" in st:
        phis = list(st["phis"])
    else:
        m = st.get("n_phi", 4)
        phis = list(2 * np.pi * np.arange(m) / m)
    grid = TemporalGrid.from_dict(raw["grid"])
    g2 = TemporalGrid.from_dict(raw["grid_2"]) if "grid_2" in raw else None
    return ExperimentConfig(
        mode=raw["mode"], grid=grid, grid_2=g2, state_spec=raw["state"], raw=copy.deepcopy(raw),
        seed=raw.get("seed", 0), output_dir=raw.get("output_dir", "out"),
        thetas=list(st.get("thetas", [np.pi / 4])), theta2=st.get("theta2"), phis=phis,
        reference_times=st.get("reference_times"), reference_width=st.get("reference_width", 0.0),
        omegas=st.get("omegas"), omega_pair=st.get("omega_pair"), noise=raw.get("noise"),
        input_records=raw.get("input_records"), base_dir=Path(base_dir),
    )


def load_config(path) -> ExperimentConfig:
    """Read and validate a config file (or a run manifest, whose embedded
    config is replayed)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"{path}: cannot read config: {e}") from e
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from e
    if isinstance(raw, dict) and raw.get("kind") == "weaktime-manifest":
        raw = raw["config"]
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return config_from_dict(raw, base_dir=path.parent)


def _pulse(grid, p):
    return gaussian_pulse(grid, p.get("peak_time", 0.0), p["width"], p.get("chirp", 0.0),
                          p.get("carrier", 0.0))


def build_state(spec: dict, grid: TemporalGrid, grid_2: TemporalGrid | None = None,
                base_dir=Path(".")):
    fam = spec["family"]
    if fam == "gaussian":
        return _pulse(grid, spec)
    if fam == "superposition":
        return superpose([(_pulse(grid, p), complex(*p.get("weight", [1.0, 0.0])))
                          for p in spec["pulses"]])
    if fam == "mixture":
        return mix([(pure_to_density(_pulse(grid, c["pulse"])), c["probability"])
                    for c in spec["components"]])
    if fam == "entangled_gaussian":
        return gaussian_entangled_pair(grid, grid_2 or grid, spec["sigma_minus"], spec["sigma_plus"])
    if fam == "file":
        p = Path(spec["path"])
        if not p.is_absolute():
            p = Path(base_dir) / p
        try:
            return state_from_dict(json.loads(p.read_text()))
        except (OSError, json.JSONDecodeError, KeyError) as e:
            raise ConfigError(f"key 'state.path': cannot load state file {p}: {e}") from e
    if fam == "inline":
        return state_from_dict(spec["state"])
    raise ConfigError(f"key 'state.family': unknown family {fam!r}")


def check_state_grid(state, cfg: ExperimentConfig) -> None:
    g = state.grid_1 if isinstance(state, TwoPhotonPureState) else state.grid
    if g != cfg.grid:
        raise ConfigError("key 'grid': state file grid differs from the configured grid")
    if isinstance(state, (PureState, DensityMatrix)) and cfg.mode == "two-photon":
        raise ConfigError("key 'state': two-photon mode needs a pair state")
    if isinstance(state, TwoPhotonPureState) and cfg.mode != "two-photon":
        raise ConfigError(f"key 'state': pair state given for mode {cfg.mode!r}")
