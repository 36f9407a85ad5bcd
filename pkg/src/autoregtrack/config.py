"""Flat ``key = value`` configuration files mapped onto dataclasses."""

from __future__ import annotations

import dataclasses
import enum
import typing


class ConfigError(ValueError):
    """Unknown key or unparsable value."""


def parse_kv(text: str) -> dict[str, str]:
    """Parse UTF-8 ``key = value`` lines; blank lines and ``#`` comments are skipped."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _coerce(value: str, tp):
    origin = typing.get_origin(tp)
    if origin is typing.Union:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if value.lower() in ("none", "null", ""):
            return None
        tp = args[0]
    if tp is bool:
        low = value.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"not a boolean: {value!r}")
    if tp is int:
        return int(value)
    if tp is float:
        return float(value)
    if isinstance(tp, type) and issubclass(tp, enum.Enum):
        try:
            return tp(value.upper())
        except ValueError:
            raise ConfigError(f"{value!r} is not one of {[m.value for m in tp]}") from None
    return value


def field_names(cls) -> set[str]:
    return {f.name for f in dataclasses.fields(cls)}


def from_mapping(cls, mapping: dict[str, str], strict: bool = True):
    """Build ``cls`` from string values; unknown keys raise when ``strict``."""
    hints = typing.get_type_hints(cls)
    names = field_names(cls)
    unknown = set(mapping) - names
    if strict and unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {}
    for key, value in mapping.items():
        if key not in names:
            continue
        try:
            kwargs[key] = _coerce(value, hints[key])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key}: {exc}") from None
    return cls(**kwargs)


def to_lines(obj) -> list[str]:
    lines = []
    for f in dataclasses.fields(obj):
        v = getattr(obj, f.name)
        if isinstance(v, enum.Enum):
            v = v.value
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{f.name} = {v}")
    return lines


def split_config(mapping: dict[str, str], *classes) -> list[dict[str, str]]:
    """Route keys of one flat file to several dataclasses; leftovers are an error."""
    parts = []
    claimed: set[str] = set()
    for cls in classes:
        names = field_names(cls)
        parts.append({k: v for k, v in mapping.items() if k in names})
        claimed |= names
    unknown = set(mapping) - claimed
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return parts
