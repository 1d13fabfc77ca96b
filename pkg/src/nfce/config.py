"""Flat ``key = value`` config files mapped onto :class:`ExperimentConfig`."""

from __future__ import annotations

import dataclasses
import logging
import typing

from .harness import ExperimentConfig

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


def _field_types() -> dict[str, object]:
    return typing.get_type_hints(ExperimentConfig)


def _parse_scalar(kind, text: str):
    if kind is bool:
        low = text.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if kind is int:
        return int(text, 0)
    if kind is float:
        return float(text)
    return text.strip()


def parse_value(key: str, text: str):
    """Convert ``text`` to the type declared for ``key``; lists are comma separated."""
    types = _field_types()
    if key not in types:
        raise ConfigError(f"unknown config key {key!r}")
    hint = types[key]
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    try:
        if origin is tuple:
            items = [t for t in text.split(",") if t.strip()]
            return tuple(_parse_scalar(args[0], t) for t in items)
        if origin is typing.Union or type(hint).__name__ == "UnionType":
            if text.strip().lower() in ("", "none", "auto"):
                return None
            kind = next(a for a in args if a is not type(None))
            return _parse_scalar(kind, text)
        return _parse_scalar(hint, text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from exc


def read_config_file(path) -> dict[str, object]:
    values = {}
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, text = (s.strip() for s in line.split("=", 1))
            values[key] = parse_value(key, text)
    return values


def format_value(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(format_value(x) for x in v)
    return str(v)


def dump_defaults() -> str:
    cfg = ExperimentConfig()
    return "\n".join(f"{f.name} = {format_value(getattr(cfg, f.name))}" for f in dataclasses.fields(cfg)) + "\n"


def build_config(file_values=None, overrides=None) -> ExperimentConfig:
    """Merge built-in defaults, config-file values and command-line overrides, in that order."""
    file_values = file_values or {}
    overrides = overrides or {}
    merged = {}
    for f in dataclasses.fields(ExperimentConfig):
        if f.name in overrides:
            merged[f.name] = overrides[f.name]
            source = "command line"
        elif f.name in file_values:
            merged[f.name] = file_values[f.name]
            source = "config file"
        else:
            continue
        log.info("%s = %s (%s)", f.name, format_value(merged[f.name]), source)
    unknown = (set(file_values) | set(overrides)) - set(_field_types())
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    try:
        return ExperimentConfig(**merged)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
