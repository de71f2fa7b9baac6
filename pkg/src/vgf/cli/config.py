"""Run-config loading, schema validation, and model construction.

A run config is a single JSON object.  Structural problems are caught
by the JSON schema below and reported with a JSON-pointer path; the
semantic rules that depend on several fields at once (operator vs.
screening parameter, domain vs. family) are enforced by the library
constructors, whose messages pass through as usage errors.
"""

from __future__ import annotations

import importlib.resources
import json
import os
from pathlib import Path

import jsonschema

from ..geometry import GeometryError, domain_from_config, family_from_config
from ..variational import BoundaryRegions, GreenModel, TrainConfig
from ..variational.bc import ConstantData
from ..variational.model import ModelError
from .errors import UsageError

__all__ = [
    "CONFIG_SCHEMA",
    "load_config",
    "load_shipped_config",
    "resolve_seed",
    "build_model",
    "build_train_config",
]

_ARCH_KEYS = ("hidden_layers", "width", "octaves", "omega0")

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "vgf run config",
    "type": "object",
    "additionalProperties": False,
    "required": ["operator", "bc"],
    "properties": {
        "operator": {"enum": ["laplace", "screened", "biharmonic"]},
        "bc": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["dirichlet", "neumann"]},
                "value": {"type": "number"},
            },
        },
        "domain": {"type": "object"},
        "family": {"type": "object"},
        "k": {"type": "number", "exclusiveMinimum": 0},
        "k_range": {
            "type": "array",
            "items": {"type": "number", "exclusiveMinimum": 0},
            "minItems": 2,
            "maxItems": 2,
        },
        "reparam_epsilon": {"type": "number", "exclusiveMinimum": 0},
        "architecture": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "hidden_layers": {"type": "integer", "minimum": 1},
                "width": {"type": "integer", "minimum": 1},
                "octaves": {"type": "integer", "minimum": 1},
                "omega0": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "training": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "epochs": {"type": "integer", "minimum": 0},
                "n_interior": {"type": "integer", "minimum": 1},
                "n_boundary": {"type": "integer", "minimum": 1},
                "lr": {"type": "number", "exclusiveMinimum": 0},
                "patience": {"type": "integer", "minimum": 1},
                "improvement_rtol": {"type": "number", "minimum": 0},
                "smoothing_half_life": {"type": "number", "exclusiveMinimum": 0},
                "lambda_mean": {"type": "number", "minimum": 0},
                "single_source": {"type": "boolean"},
                "seed": {"type": "integer"},
            },
        },
    },
}


def _pointer(error: jsonschema.ValidationError) -> str:
    path = "/".join(str(part) for part in error.absolute_path)
    return "/" + path


def parse_config_bytes(raw: bytes, origin: str) -> dict:
    """Parse and schema-check config bytes; `origin` labels errors."""
    try:
        cfg = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise UsageError(f"{origin} is not valid JSON: {exc}") from exc

    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=jsonschema.exceptions.relevance)
    if errors:
        best = jsonschema.exceptions.best_match(errors)
        raise UsageError(f"config violates schema at {_pointer(best)}: {best.message}")

    if ("domain" in cfg) == ("family" in cfg):
        raise UsageError("config must contain exactly one of 'domain' or 'family'")
    return cfg


def load_config(path) -> tuple[bytes, dict]:
    """Read, parse, and schema-check a config file.

    Returns the raw bytes (stored verbatim next to run outputs so the
    manifest hash is over exactly what the user wrote) and the parsed
    dict.
    """
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read config {p}: {exc}") from exc
    return raw, parse_config_bytes(raw, str(p))


def load_shipped_config(relpath: str) -> tuple[bytes, dict]:
    """A config bundled with the package, e.g. "validate/interval-1d.json"."""
    resource = importlib.resources.files("vgf").joinpath("configs", relpath)
    try:
        raw = resource.read_bytes()
    except (FileNotFoundError, OSError) as exc:
        raise UsageError(f"no shipped config {relpath!r}: {exc}") from exc
    return raw, parse_config_bytes(raw, f"shipped config {relpath}")


def resolve_seed(cfg: dict) -> tuple[int, str]:
    """Root seed for the run: VGF_SEED overrides the config value."""
    env = os.environ.get("VGF_SEED")
    if env is not None:
        try:
            return int(env), "env:VGF_SEED"
        except ValueError:
            raise UsageError(f"VGF_SEED must be an integer, got {env!r}") from None
    return int(cfg.get("training", {}).get("seed", 0)), "config"


def build_model(cfg: dict, seed: int) -> GreenModel:
    """Construct the GreenModel a config describes (untrained)."""
    bc_block = cfg["bc"]
    bc = BoundaryRegions(bc_block["kind"], ConstantData(float(bc_block.get("value", 0.0))))

    kwargs = {}
    arch = cfg.get("architecture", {})
    for key in _ARCH_KEYS:
        if key in arch:
            kwargs[key] = arch[key]
    if "k" in cfg:
        kwargs["k"] = cfg["k"]
    if "k_range" in cfg:
        kwargs["k_range"] = tuple(cfg["k_range"])
    if "reparam_epsilon" in cfg:
        kwargs["reparam_epsilon"] = cfg["reparam_epsilon"]

    try:
        if "domain" in cfg:
            kwargs["domain"] = domain_from_config(cfg["domain"])
            kwargs["domain_config"] = cfg["domain"]
        else:
            kwargs["family"] = family_from_config(cfg["family"])
            kwargs["family_config"] = cfg["family"]
        return GreenModel(cfg["operator"], bc=bc, rng_seed=seed, **kwargs)
    except (GeometryError, ModelError, KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"config does not describe a valid model: {exc}") from exc


def build_train_config(cfg: dict, seed: int, history_path=None) -> TrainConfig:
    block = dict(cfg.get("training", {}))
    block.pop("seed", None)
    block["seed"] = seed
    if history_path is not None:
        block["history_path"] = str(history_path)
    try:
        return TrainConfig(**block)
    except ValueError as exc:
        raise UsageError(f"bad training block: {exc}") from exc
