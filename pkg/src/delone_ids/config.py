"""Experiment configuration: JSON schema, canonical form and hashing."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field

from jsonschema import Draft202012Validator
from jsonschema.exceptions import best_match

from .delone_core import Box, scalar_from_json
from .kernels import CATALOG
from .spectral import EnergyGrid, van_hove_boxes

EXPERIMENTS = ("verify", "density", "tau", "ids", "shubin", "omega", "gaps")

_SCALAR = {
    "oneOf": [
        {"type": "number"},
        {"type": "string", "pattern": r"^-?\d+(/\d+)?$"},
        {
            "type": "array",
            "minItems": 2,
            "maxItems": 2,
            "items": {"oneOf": [{"type": "integer"}, {"type": "string", "pattern": r"^-?\d+(/\d+)?$"}]},
        },
    ]
}

_GENERATOR = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["periodic", "cut_project", "substitution", "perturbed"]},
        "theta": {"enum": ["phi", "sqrt2"]},
        "dim": {"enum": [1, 2]},
        "window": {"type": "array", "minItems": 2, "maxItems": 2, "items": {"$ref": "#/$defs/scalar"}},
        "phase": {"$ref": "#/$defs/scalar"},
        "basis": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        "delta": {"type": "number", "minimum": 0},
        "seed": {"type": "integer"},
        "r": {"type": "number", "exclusiveMinimum": 0},
        "R": {"type": "number", "exclusiveMinimum": 0},
        "offset": {"type": "array", "items": {"$ref": "#/$defs/scalar"}},
        "rule": {
            "oneOf": [
                {"enum": ["fibonacci", "silver"]},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["alphabet", "rule", "lengths"],
                    "properties": {
                        "name": {"type": "string"},
                        "alphabet": {"type": "array", "items": {"type": "string"}},
                        "rule": {"type": "object", "additionalProperties": {"type": "string"}},
                        "lengths": {"type": "object", "additionalProperties": {"$ref": "#/$defs/scalar"}},
                    },
                },
            ]
        },
        "base": {"$ref": "#/$defs/generator"},
    },
    "allOf": [{"if": {"properties": {"kind": {"const": "perturbed"}}}, "then": {"required": ["base", "delta"]}}],
}

_ATOMIC_KERNEL = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name"],
    "properties": {
        "name": {"enum": sorted(CATALOG)},
        "rho": {"type": "number", "exclusiveMinimum": 0},
        "table": {"type": "array", "items": {"type": "array", "minItems": 2, "maxItems": 2, "items": {"type": "number"}}},
        "csv": {"type": "string"},
        "values": {"type": "object", "additionalProperties": {"type": "number"}},
        "lam": {"type": "number"},
        "s": {"type": "number", "exclusiveMinimum": 0},
        "seed": {"type": "integer"},
        "range": {"type": "number", "minimum": 0},
        "local_radius": {"type": "number", "minimum": 0},
        "complex": {"type": "boolean"},
        "integer": {"type": "boolean"},
    },
}

_OP_KERNEL = {
    "type": "object",
    "additionalProperties": False,
    "required": ["op"],
    "properties": {
        "op": {"enum": ["add", "mul", "scale", "adjoint", "power"]},
        "args": {"type": "array", "minItems": 2, "items": {"$ref": "#/$defs/kernel"}},
        "arg": {"$ref": "#/$defs/kernel"},
        "factor": {"oneOf": [{"type": "number"}, {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}]},
        "n": {"type": "integer", "minimum": 1},
    },
    "allOf": [
        {"if": {"properties": {"op": {"enum": ["add", "mul"]}}}, "then": {"required": ["args"]}},
        {"if": {"properties": {"op": {"const": "scale"}}}, "then": {"required": ["arg", "factor"]}},
        {"if": {"properties": {"op": {"const": "adjoint"}}}, "then": {"required": ["arg"]}},
        {"if": {"properties": {"op": {"const": "power"}}}, "then": {"required": ["arg", "n"]}},
    ],
}

_OPTIONS = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "phi": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "second_generator": {"$ref": "#/$defs/generator"},
        "orbit_box": {"type": "number", "exclusiveMinimum": 0},
        "orbit_seed": {"type": "integer"},
        "min_width": {"type": "number", "minimum": 0},
        "radii": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 2},
        "census_radius": {"type": "number", "exclusiveMinimum": 0},
        "birkhoff": {"type": "boolean"},
        "weight": {"enum": ["indicator", "triangular"]},
        "orbit_samples": {"type": "integer", "minimum": 0},
        "oracle": {"enum": ["free_z"]},
        "tolerance": {"type": "number", "exclusiveMinimum": 0},
        "expected": {"type": "number"},
        "richardson": {"type": "boolean"},
        "strict_decrease": {"type": "integer", "minimum": 0},
        "extents": {"type": "boolean"},
    },
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "delone_ids experiment config",
    "type": "object",
    "additionalProperties": False,
    "required": ["experiment", "generator"],
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "generator": {"$ref": "#/$defs/generator"},
        "kernel": {"$ref": "#/$defs/kernel"},
        "boxes": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "d": {"enum": [1, 2]},
                "L0": {"type": "number", "exclusiveMinimum": 0},
                "count": {"type": "integer", "minimum": 1},
                "growth": {"type": "number", "exclusiveMinimum": 1},
                "halfwidths": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
            },
            "oneOf": [{"required": ["L0", "count"]}, {"required": ["halfwidths"]}],
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "lo": {"type": "number"},
                "hi": {"type": "number"},
                "m": {"type": "integer", "minimum": 1},
                "energies": {"type": "array", "items": {"type": "number"}, "minItems": 1},
            },
            "oneOf": [{"required": ["lo", "hi", "m"]}, {"required": ["energies"]}],
        },
        "seed": {"type": "integer"},
        "output_dir": {"type": "string"},
        "normalization": {"enum": ["per_volume", "per_site"]},
        "options": _OPTIONS,
    },
    "allOf": [
        {"if": {"properties": {"experiment": {"enum": ["tau", "shubin"]}}}, "then": {"required": ["kernel", "boxes"]}},
        {"if": {"properties": {"experiment": {"enum": ["ids", "omega", "gaps"]}}}, "then": {"required": ["kernel", "boxes", "grid"]}},
        {"if": {"properties": {"experiment": {"const": "density"}}}, "then": {"properties": {"options": {"required": ["radii"]}}, "required": ["options"]}},
    ],
    "$defs": {"scalar": _SCALAR, "generator": _GENERATOR, "kernel": {"oneOf": [_ATOMIC_KERNEL, _OP_KERNEL]}},
}


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        super().__init__("invalid config:\n  " + "\n  ".join(errors))
        self.errors = errors


def _path(err) -> str:
    parts = [str(p) for p in err.absolute_path]
    return "/" + "/".join(parts)


def validate(data: dict) -> None:
    v = Draft202012Validator(SCHEMA)
    errs = sorted(v.iter_errors(data), key=lambda e: list(map(str, e.absolute_path)))
    if errs:
        # oneOf failures hide the useful message in the sub-errors
        leaves = [best_match([e]) for e in errs]
        raise ConfigError(sorted({f"{_path(e)}: {e.message}" for e in leaves}))


def canonicalize(data: dict) -> dict:
    """Defaults filled in; idempotent."""
    validate(data)
    c = copy.deepcopy(data)
    c.setdefault("seed", 0)
    c.setdefault("output_dir", "out")
    c.setdefault("normalization", "per_volume")
    c.setdefault("options", {})
    if "boxes" in c:
        b = c["boxes"]
        b.setdefault("d", 1)
        if "L0" in b:
            b.setdefault("growth", 2)
    return json.loads(json.dumps(c, sort_keys=True))


def config_hash(data: dict) -> str:
    canon = canonicalize(data)
    canon.pop("output_dir", None)
    blob = json.dumps(canon, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def dumps(data: dict) -> str:
    return json.dumps(canonicalize(data), sort_keys=True, indent=2) + "\n"


def _exact_halfwidth(x):
    if isinstance(x, float) and x.is_integer():
        return int(x)
    return x


@dataclass
class ExperimentConfig:
    experiment: str
    generator: dict
    kernel: dict | None = None
    boxes: dict | None = None
    grid: dict | None = None
    seed: int = 0
    output_dir: str = "out"
    normalization: str = "per_volume"
    options: dict = field(default_factory=dict)
    base_dir: str | None = None

    @classmethod
    def from_dict(cls, data: dict, base_dir: str | None = None) -> ExperimentConfig:
        c = canonicalize(data)
        return cls(base_dir=base_dir, **c)

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        import os

        with open(path) as fh:
            data = json.load(fh)
        return cls.from_dict(data, base_dir=os.path.dirname(os.path.abspath(path)))

    def to_dict(self) -> dict:
        d = {
            "experiment": self.experiment,
            "generator": self.generator,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "normalization": self.normalization,
            "options": self.options,
        }
        for key in ("kernel", "boxes", "grid"):
            if getattr(self, key) is not None:
                d[key] = getattr(self, key)
        return canonicalize(d)

    @property
    def hash(self) -> str:
        return config_hash(self.to_dict())

    def box_list(self) -> list[Box]:
        b = self.boxes
        if b is None:
            return []
        d = b.get("d", 1)
        if "halfwidths" in b:
            return [Box.cube(_exact_halfwidth(h), d) for h in b["halfwidths"]]
        return van_hove_boxes(d, _exact_halfwidth(b["L0"]), b["count"], b.get("growth", 2))

    def energy_grid(self) -> EnergyGrid | None:
        g = self.grid
        if g is None:
            return None
        if "energies" in g:
            return EnergyGrid.explicit(g["energies"])
        return EnergyGrid.uniform(g["lo"], g["hi"], g["m"])


def parse_scalar(x, theta="phi"):
    return scalar_from_json(x, theta)
