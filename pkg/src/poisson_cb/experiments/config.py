"""JSON experiment configuration: schema, validation and defaults.

Example::

    {
      "design": {"kind": "denoising", "n": 100},
      "algorithm": {"name": "eb_one_step", "params": {"h": 0.85}},
      "losses": ["squared", "deviance"],
      "methods": ["cb", "ue"],
      "p": [0.05, 0.1, 0.3, 0.5, 0.7],
      "B": 100,
      "repetitions": 100,
      "seed": 1,
      "truth": {"R": 2000}
    }

``"p": "auto"`` selects ``min(0.1, sum(mu) / sum(mu^2))`` from the true means.
"""

from __future__ import annotations

import json

import jsonschema

from .algorithms import ALGORITHMS

LOSSES = ["squared", "deviance"]

_DESIGN = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["lowdim", "highdim", "denoising", "constant", "phantom"]},
        "n": {"type": "integer", "minimum": 1},
        "d": {"type": "integer", "minimum": 1},
        "theta": {"type": "number"},
        "beta": {"type": "number"},
        "sigma2": {"type": "number", "exclusiveMinimum": 0},
        "n_high": {"type": "integer", "minimum": 0},
        "high": {"type": "number", "minimum": 0},
        "low": {"type": "number", "minimum": 0},
        "mu": {"type": "number", "minimum": 0},
        "size": {"type": "integer", "minimum": 2},
        "phantom": {"enum": ["shepp_logan", "two_level"]},
        "scale": {"type": "number", "minimum": 0},
        "offset": {"type": "number", "minimum": 0},
        "design_seed": {"type": "integer", "minimum": 0},
    },
    "additionalProperties": False,
    "allOf": [{"if": {"properties": {"kind": {"const": "constant"}}},
               "then": {"required": ["kind", "mu"]}}],
}

SIMULATE_SCHEMA = {
    "type": "object",
    "required": ["design", "algorithm"],
    "properties": {
        "experiment": {"type": "string"},
        "design": _DESIGN,
        "algorithm": {
            "type": "object",
            "required": ["name"],
            "properties": {
                "name": {"enum": sorted(ALGORITHMS)},
                "params": {"type": "object"},
            },
            "additionalProperties": False,
        },
        "losses": {"type": "array", "items": {"enum": LOSSES}, "minItems": 1, "uniqueItems": True},
        "methods": {"type": "array", "items": {"enum": ["cb", "ue", "ue_ss"]}, "minItems": 1,
                    "uniqueItems": True},
        "p": {"oneOf": [
            {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
             "minItems": 1},
            {"const": "auto"},
        ]},
        "B": {"type": "integer", "minimum": 1},
        "m": {"type": "integer", "minimum": 1},
        "subsample": {"enum": ["summand", "correction"]},
        "repetitions": {"type": "integer", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "pad_c": {"type": "number", "exclusiveMinimum": 0},
        "truth": {
            "type": "object",
            "properties": {"R": {"type": "integer", "minimum": 2}, "enabled": {"type": "boolean"}},
            "additionalProperties": False,
        },
        "out": {"type": "string"},
    },
    "additionalProperties": False,
}

DEFAULTS = {
    "experiment": "simulate",
    "losses": ["squared", "deviance"],
    "methods": ["cb", "ue"],
    "p": [0.05, 0.1, 0.3, 0.5, 0.7],
    "B": 100,
    "m": 100,
    "subsample": "summand",
    "repetitions": 100,
    "seed": 0,
    "pad_c": 1e-8,
    "truth": {"R": 2000, "enabled": True},
}


class ConfigError(ValueError):
    pass


def _path(err) -> str:
    parts = ["config"]
    for p in err.absolute_path:
        parts.append(f"[{p}]" if isinstance(p, int) else f".{p}")
    return "".join(parts)


def validate(cfg: dict, schema: dict = SIMULATE_SCHEMA) -> dict:
    """Validate and fill defaults; errors name the offending field path."""
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError("; ".join(f"{_path(e)}: {e.message}" for e in errors))
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in DEFAULTS.items()}
    for k, v in cfg.items():
        if k == "truth":
            out["truth"] = {**DEFAULTS["truth"], **v}
        else:
            out[k] = v
    out["algorithm"] = {"params": {}, **cfg["algorithm"]}
    return out


def load(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config: must be a JSON object")
    return validate(cfg)
