"""Run configuration: dataclasses, JSON schema and loading."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import jsonschema

_VEC3 = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}
_PAIR = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "adm_shells run configuration",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "seed": {
            "type": "object",
            "additionalProperties": {"type": "number"},
            "propertyNames": {"pattern": "^[0-9]+,[0-9]+,[0-9]+$"},
            "description": "polynomial seed u as {'a,b,c': coefficient of x^a y^b z^c}",
        },
        "sigma_profile": _PAIR,
        "tau_profile": _PAIR,
        "lie_axis": _VEC3,
        "cm_bump": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"theta": _PAIR, "phi": _PAIR},
            "required": ["theta", "phi"],
        },
        "base": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"mass": {"type": "number", "exclusiveMinimum": 0}, "center": _VEC3},
            "required": ["mass"],
        },
        "alpha": _VEC3,
        "gamma": _VEC3,
        "k_list": {"type": "array", "items": {"type": "number", "minimum": 1}, "minItems": 1},
        "resolution": {"type": "array", "items": {"type": "integer", "minimum": 4}, "minItems": 2, "maxItems": 2},
        "radii": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 3},
        "corrector": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "L": {"type": "integer", "minimum": 2, "maximum": 32},
                "ds": {"type": "number", "exclusiveMinimum": 0},
                "outer_factor": {"type": "number", "minimum": 10},
            },
        },
        "out_dir": {"type": "string"},
        "normalize_by_E": {"type": "boolean"},
        "star_orientation": {"enum": ["outward", "inward"]},
    },
}


@dataclass
class CorrectorConfig:
    L: int = 16
    ds: float = 0.0096
    outer_factor: float = 20.0


@dataclass
class RunConfig:
    seed: dict = field(default_factory=lambda: {"0,3,0": 1.0, "0,1,2": -3.0})
    sigma_profile: tuple = (1.05, 1.95)
    tau_profile: tuple = (1.05, 1.95)
    lie_axis: tuple = (1.0, 0.0, 0.0)
    cm_bump: dict = field(default_factory=lambda: {"theta": [0.3, 1.2], "phi": [0.3, 1.2]})
    base: dict = field(default_factory=lambda: {"mass": 1.0, "center": [0.0, 0.0, 0.0]})
    alpha: tuple = (0.0, 0.0, 0.1)
    gamma: tuple = (0.0, 0.0, 0.0)
    k_list: tuple = (4.0, 8.0, 16.0)
    resolution: tuple = (64, 128)
    radii: tuple = (50.0, 100.0, 200.0)
    corrector: CorrectorConfig = field(default_factory=CorrectorConfig)
    out_dir: str = "out"
    normalize_by_E: bool = True
    star_orientation: str = "outward"

    def to_json(self) -> dict:
        d = asdict(self)
        for key in ("sigma_profile", "tau_profile", "lie_axis", "alpha", "gamma", "k_list", "resolution", "radii"):
            d[key] = list(d[key])
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        validate(d)
        d = dict(d)
        if "corrector" in d:
            d["corrector"] = CorrectorConfig(**d["corrector"])
        for key in ("sigma_profile", "tau_profile", "lie_axis", "alpha", "gamma", "k_list", "resolution", "radii"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


def validate(d: dict) -> None:
    jsonschema.validate(d, SCHEMA)


def load_config(path) -> RunConfig:
    return RunConfig.from_dict(json.loads(Path(path).read_text()))


def write_schema(path) -> None:
    Path(path).write_text(json.dumps(SCHEMA, indent=2, sort_keys=True) + "\n")
