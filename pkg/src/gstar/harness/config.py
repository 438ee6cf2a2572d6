"""Experiment configuration: JSON documents validated against a schema."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema

from ..core import Ball, Box, ConstraintSet

INSTANCE_KINDS = [
    "lp_regression",
    "cross_entropy",
    "prop1_case2",
    "prop1_case3",
    "prop1_case4",
    "lower_bound",
    "stochastic_consistent_ls",
    "stochastic_noisy_ls",
    "stochastic_quartic",
]

ALGORITHMS = ["ogd", "adagrad_norm", "adaftrl", "sword", "bgd_constant", "bgd_adanorm"]

_algo_schema = {
    "type": "object",
    "required": ["name"],
    "properties": {
        "name": {"enum": ALGORITHMS},
        "params": {"type": "object"},
    },
    "additionalProperties": False,
}

CONFIG_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "ExperimentConfig",
    "type": "object",
    "required": ["instance", "T", "seeds", "algorithm"],
    "properties": {
        "instance": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": INSTANCE_KINDS},
                "params": {"type": "object"},
            },
            "additionalProperties": False,
        },
        "T": {
            "oneOf": [
                {"type": "integer", "minimum": 1},
                {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
            ]
        },
        "dim": {"type": "integer", "minimum": 1},
        "set": {
            "oneOf": [
                {
                    "type": "object",
                    "required": ["type", "radius"],
                    "properties": {
                        "type": {"const": "ball"},
                        "center": {"type": "array", "items": {"type": "number"}},
                        "radius": {"type": "number", "exclusiveMinimum": 0},
                    },
                    "additionalProperties": False,
                },
                {
                    "type": "object",
                    "required": ["type", "lower", "upper"],
                    "properties": {
                        "type": {"const": "box"},
                        "lower": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                        "upper": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                    },
                    "additionalProperties": False,
                },
            ]
        },
        "algorithm": {"oneOf": [_algo_schema, {"type": "array", "items": _algo_schema, "minItems": 1}]},
        "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        "hindsight_tol": {"type": "number", "exclusiveMinimum": 0},
        "outputs": {
            "type": "object",
            "properties": {
                "csv": {"type": "string"},
                "json": {"type": "string"},
                "traces": {"type": "string"},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AlgorithmSpec:
    name: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ExperimentConfig:
    instance_kind: str
    instance_params: dict
    T: tuple[int, ...]
    dim: int
    set_spec: dict | None
    algorithms: tuple[AlgorithmSpec, ...]
    seeds: tuple[int, ...]
    hindsight_tol: float = 1e-10
    outputs: dict = field(default_factory=dict)

    def build_set(self) -> ConstraintSet | None:
        return build_set(self.set_spec, self.dim)

    def to_dict(self) -> dict:
        d: dict[str, Any] = {
            "instance": {"kind": self.instance_kind, "params": dict(self.instance_params)},
            "T": list(self.T),
            "dim": self.dim,
            "algorithm": [{"name": a.name, "params": dict(a.params)} for a in self.algorithms],
            "seeds": list(self.seeds),
            "hindsight_tol": self.hindsight_tol,
        }
        if self.set_spec is not None:
            d["set"] = dict(self.set_spec)
        if self.outputs:
            d["outputs"] = dict(self.outputs)
        return d

    def with_T(self, T_grid) -> "ExperimentConfig":
        return ExperimentConfig(self.instance_kind, self.instance_params, tuple(int(t) for t in T_grid), self.dim,
                                self.set_spec, self.algorithms, self.seeds, self.hindsight_tol, self.outputs)


def build_set(spec: dict | None, dim: int) -> ConstraintSet | None:
    if spec is None:
        return None
    if spec["type"] == "ball":
        center = spec.get("center", [0.0] * dim)
        if len(center) != dim:
            raise ConfigError(f"ball center has {len(center)} entries, dim is {dim}")
        return Ball(center, spec["radius"])
    if len(spec["lower"]) != len(spec["upper"]):
        raise ConfigError("box bounds differ in length")
    return Box(spec["lower"], spec["upper"])


def parse_config(doc: dict) -> ExperimentConfig:
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {path}: {exc.message}") from None
    T = doc["T"]
    algos = doc["algorithm"]
    if isinstance(algos, dict):
        algos = [algos]
    cfg = ExperimentConfig(
        instance_kind=doc["instance"]["kind"],
        instance_params=dict(doc["instance"].get("params", {})),
        T=tuple([T] if isinstance(T, int) else T),
        dim=int(doc.get("dim", 2)),
        set_spec=doc.get("set"),
        algorithms=tuple(AlgorithmSpec(a["name"], dict(a.get("params", {}))) for a in algos),
        seeds=tuple(doc["seeds"]),
        hindsight_tol=float(doc.get("hindsight_tol", 1e-10)),
        outputs=dict(doc.get("outputs", {})),
    )
    cfg.build_set()  # surface set errors at load time
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {p} is not valid JSON: {exc}") from None
    return parse_config(doc)
