"""Run configuration: a flat JSON object of namespaced keys.

Precedence is command-line overrides, then the config file, then defaults.
Unknown keys are rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from typing import Any, Mapping

from .bio import EncodingPolicy
from .tagger.features import FeatureConfig
from .tagger.train import TrainConfig
from .textnorm import NormalizationConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Paths:
    train: str | None = None
    dev: str | None = None
    test: str | None = None
    model: str | None = None
    output: str | None = None
    telemetry: str | None = None


@dataclass(frozen=True)
class ScorerOptions:
    include_absent_techniques: bool = False


_SECTIONS = {
    "paths": Paths,
    "norm": NormalizationConfig,
    "encoding": EncodingPolicy,
    "features": FeatureConfig,
    "train": TrainConfig,
    "scorer": ScorerOptions,
}


@dataclass(frozen=True)
class RunConfig:
    paths: Paths = field(default_factory=Paths)
    norm: NormalizationConfig = field(default_factory=NormalizationConfig)
    encoding: EncodingPolicy = field(default_factory=EncodingPolicy)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    scorer: ScorerOptions = field(default_factory=ScorerOptions)

    @classmethod
    def known_keys(cls) -> list[str]:
        return [f"{name}.{f.name}" for name, section in _SECTIONS.items() for f in fields(section)]

    def with_values(self, values: Mapping[str, Any]) -> "RunConfig":
        updates: dict[str, dict[str, Any]] = {}
        for key, value in values.items():
            section, _, name = key.partition(".")
            if section not in _SECTIONS or name not in {f.name for f in fields(_SECTIONS[section])}:
                raise ConfigError(f"unknown config key {key!r}")
            updates.setdefault(section, {})[name] = _coerce(key, value, getattr(getattr(self, section), name))
        result = self
        for section, changes in updates.items():
            try:
                result = replace(result, **{section: replace(getattr(result, section), **changes)})
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"invalid {section} settings: {exc}") from exc
        return result

    def flat(self) -> dict[str, Any]:
        out = {}
        for name in _SECTIONS:
            section = getattr(self, name)
            for f in fields(section):
                value = getattr(section, f.name)
                out[f"{name}.{f.name}"] = list(value) if isinstance(value, tuple) else value
        return out


def _coerce(key: str, value: Any, default: Any) -> Any:
    if value is None:
        return None
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key} must be a boolean")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key} must be an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number")
        return float(value)
    if isinstance(default, tuple):
        if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
            raise ConfigError(f"{key} must be a list of integers")
        return tuple(value)
    if not isinstance(value, str):
        raise ConfigError(f"{key} must be a string")
    return value


def load_config(path: str | None, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    values: dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as f:
                loaded = json.load(f)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config must be a JSON object")
        values.update(loaded)
    values.update(overrides or {})
    return RunConfig().with_values(values)


def parse_override(text: str) -> tuple[str, Any]:
    """``key=value`` with value read as JSON, falling back to a bare string."""
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise ConfigError(f"override {text!r} is not key=value")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value
