"""Global configuration file: metric, render, engine, and endpoint settings.

The file is JSON with a fixed key set; unknown keys are rejected with their
location so typos never silently fall back to defaults.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .bridge import EndpointConfig, PromptConfig
from .engine import GameConfig, condition_preset
from .metric import MetricConfig
from .render import RenderStyle


class ConfigError(ValueError):
    pass


_SECTIONS = {
    "metric": {"samples_per_curve", "canvas_extent", "cap", "aggregation"},
    "render": {
        "size",
        "design_width",
        "overlay_width",
        "design_color",
        "overlay_color",
        "background",
    },
    "engine": {
        "preset",
        "max_rounds",
        "total_time",
        "win_threshold",
        "submission_schedule",
        "lives",
        "modality",
        "char_limit",
        "designer_time",
        "maker_time",
        "designer_time_multiplier",
        "reveal_distance",
    },
    "endpoint": {
        "base_url",
        "model",
        "api_key_env",
        "temperature",
        "top_p",
        "max_tokens",
        "timeout",
        "max_attempts",
        "backoff",
    },
    "prompt": {
        "system_text",
        "round_header",
        "directive",
        "feedback_prefix",
        "include_images",
    },
}


@dataclass
class GlobalConfig:
    metric: MetricConfig = field(default_factory=MetricConfig)
    render: RenderStyle = field(default_factory=RenderStyle)
    engine: GameConfig = field(default_factory=GameConfig)
    endpoint: EndpointConfig = field(default_factory=EndpointConfig)
    prompt: PromptConfig = field(default_factory=PromptConfig)


def _check_keys(obj: dict, allowed: set[str], location: str) -> None:
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"unknown key {location}.{key}")


def parse_config(obj: dict) -> GlobalConfig:
    if not isinstance(obj, dict):
        raise ConfigError("config root must be an object")
    _check_keys(obj, set(_SECTIONS), "config")
    cfg = GlobalConfig()
    for section, allowed in _SECTIONS.items():
        if section not in obj:
            continue
        body = obj[section]
        if not isinstance(body, dict):
            raise ConfigError(f"config.{section} must be an object")
        _check_keys(body, allowed, f"config.{section}")
    try:
        if "metric" in obj:
            cfg.metric = MetricConfig(**obj["metric"])
        if "render" in obj:
            cfg.render = RenderStyle(**obj["render"])
        if "engine" in obj:
            body = dict(obj["engine"])
            preset = body.pop("preset", None)
            base = condition_preset(preset) if preset else GameConfig()
            if "submission_schedule" in body and body["submission_schedule"] is not None:
                body["submission_schedule"] = tuple(body["submission_schedule"])
            cfg.engine = replace(base, **body) if body else base
        if "metric" in obj:
            cfg.engine = replace(cfg.engine, metric=cfg.metric)
        if "endpoint" in obj:
            cfg.endpoint = EndpointConfig(**obj["endpoint"])
        if "prompt" in obj:
            cfg.prompt = PromptConfig(**obj["prompt"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path: str | Path | None) -> GlobalConfig:
    if path is None:
        return GlobalConfig()
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    try:
        return parse_config(obj)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
