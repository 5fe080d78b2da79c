"""Plain-text key=value configuration files.

Lines look like ``corpus.n_cases = 2000``; ``#`` starts a comment. Keys are
namespaced by stage (corpus., cohort., experiment.) and map onto dataclass
fields, including one level of nesting for the trajectory profiles
(``corpus.case_profile.peak_rate = 45``). Values are coerced from the
target field's type; unknown keys are configuration errors.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import types
import typing

from .errors import ConfigError


def parse_kv_file(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = line.split("=", 1)
            key = key.strip()
            if not key:
                raise ConfigError(f"{path}:{lineno}: empty key")
            if key in out:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            out[key] = value.strip()
    return out


def _coerce(value: str, field_type, key: str):
    origin = typing.get_origin(field_type)
    if field_type is bool:
        v = value.lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected boolean, got {value!r}")
    if field_type is int:
        return int(value)
    if field_type is float:
        return float(value)
    if field_type is str:
        return value
    if field_type is dt.date:
        return dt.date.fromisoformat(value)
    if origin is typing.Union or isinstance(field_type, types.UnionType):  # Optional[...]
        args = [a for a in typing.get_args(field_type) if a is not type(None)]
        if value.lower() in ("none", ""):
            return None
        return _coerce(value, args[0], key)
    if origin is tuple:
        args = typing.get_args(field_type)
        elem = args[0] if args else str
        items = [v.strip() for v in value.split(",") if v.strip()]
        return tuple(_coerce(v, elem, key) for v in items)
    raise ConfigError(f"{key}: unsupported config field type {field_type}")


def apply_kv(instance, kv: dict[str, str], prefix: str):
    """Overlay ``prefix.*`` keys from kv onto a dataclass instance (returns a
    new instance; nested dataclass fields recurse one level)."""
    if not dataclasses.is_dataclass(instance):
        raise TypeError("apply_kv needs a dataclass instance")
    fields = {f.name: f for f in dataclasses.fields(instance)}
    hints = typing.get_type_hints(type(instance))
    updates: dict[str, object] = {}
    nested: dict[str, dict[str, str]] = {}
    for key, value in kv.items():
        if not key.startswith(prefix + "."):
            continue
        rest = key[len(prefix) + 1 :]
        name, _, sub = rest.partition(".")
        if name not in fields:
            raise ConfigError(f"unknown config key {key!r}")
        if sub:
            nested.setdefault(name, {})[sub] = value
        else:
            updates[name] = _coerce(value, hints[name], key)
    for name, subkv in nested.items():
        current = updates.get(name, getattr(instance, name))
        if not dataclasses.is_dataclass(current):
            raise ConfigError(f"{prefix}.{name} does not accept nested keys")
        updates[name] = apply_kv(current, {f"x.{k}": v for k, v in subkv.items()}, "x")
    return dataclasses.replace(instance, **updates) if updates else instance


def known_prefixes(kv: dict[str, str], allowed: tuple[str, ...]) -> None:
    for key in kv:
        if not any(key.startswith(p + ".") for p in allowed):
            raise ConfigError(f"unknown config section in key {key!r} (sections: {', '.join(allowed)})")
