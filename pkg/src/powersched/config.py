"""Experiment configuration: built-in defaults, a YAML/JSON file, then overrides."""

from __future__ import annotations

import copy
from dataclasses import fields
from pathlib import Path
from typing import Any, Mapping

import yaml

from .network import DynParams
from .scheduler import OptimizerConfig
from .simulate import CostConfig
from .window import WindowConfig

__all__ = ["DEFAULTS", "load_config", "merge", "resolve", "Experiment"]

DEFAULT_DISTURBANCE_SEED = 1

DEFAULTS: dict[str, Any] = {
    "case": None,
    "placement": None,
    "seed": DEFAULT_DISTURBANCE_SEED,
    "range": 0.3,
    "horizon": 5.0,
    "step": 1e-3,
    "jobs": 1,
    "dynamics": {},
    "cost": {},
    "optimizer": {},
    "window": {},
    "design": {"n_designs": 20, "seed": 0, "with_optimal": False, "candidates": "adjacent"},
}

_SECTIONS = {"dynamics", "cost", "optimizer", "window", "design"}


class ConfigError(ValueError):
    pass


def load_config(path) -> dict:
    """Read a mapping from YAML (JSON is accepted as a YAML subset)."""
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    unknown = set(data) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    return data


def merge(base: Mapping, *layers: Mapping) -> dict:
    """Later layers win; ``None`` values never override; sections merge key by key."""
    out = copy.deepcopy(dict(base))
    for layer in layers:
        for key, val in layer.items():
            if val is None:
                continue
            if key in _SECTIONS:
                if not isinstance(val, Mapping):
                    raise ConfigError(f"section {key!r} must be a mapping")
                out[key] = {**out.get(key, {}), **{k: v for k, v in val.items() if v is not None}}
            else:
                out[key] = val
    return out


def _build(cls, section: str, values: Mapping):
    names = {f.name for f in fields(cls)}
    unknown = set(values) - names
    if unknown:
        raise ConfigError(f"unknown {section} keys {sorted(unknown)}")
    return cls(**values)


class Experiment:
    """Resolved configuration with the module config objects built."""

    def __init__(self, cfg: Mapping):
        self.raw = dict(cfg)
        self.cost = _build(CostConfig, "cost", cfg["cost"])
        opt = dict(cfg["optimizer"])
        opt.setdefault("step", cfg["step"])
        self.optimizer = _build(OptimizerConfig, "optimizer", opt)
        self.window = _build(WindowConfig, "window", cfg["window"])
        self.dynamics = DynParams.from_mapping(cfg["dynamics"])
        self.design = dict(cfg["design"])
        unknown = set(self.design) - set(DEFAULTS["design"])
        if unknown:
            raise ConfigError(f"unknown design keys {sorted(unknown)}")

    def __getattr__(self, key):
        try:
            return self.raw[key]
        except KeyError:
            raise AttributeError(key) from None


def resolve(config_path=None, overrides: Mapping | None = None) -> Experiment:
    layers = [load_config(config_path)] if config_path else []
    return Experiment(merge(DEFAULTS, *layers, overrides or {}))
