"""Flat ``key = value`` configuration files with dotted keys for nested sections.

Example::

    # tracker
    tau_high = 0.6
    cmc.theta_th = 0.9
    enable_cmc = true
"""
from __future__ import annotations

import dataclasses
import typing
from pathlib import Path

from .synth import SynthConfig
from .tracker import TrackerConfig

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


class ConfigError(ValueError):
    pass


def parse_flat(text: str) -> dict[str, str]:
    entries: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {line_no}: empty key")
        entries[key] = value
    return entries


def _convert(key: str, raw: str, kind):
    try:
        if kind is bool:
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is str:
            return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    raise ConfigError(f"{key} cannot be set from a config file")


def _parse_occlusions(key: str, raw: str) -> tuple[tuple[int, int, int], ...]:
    """``"3:40-45, 5:100-120"`` -> ((3, 40, 45), (5, 100, 120))."""
    out = []
    for item in filter(None, (p.strip() for p in raw.split(","))):
        try:
            oid, span = item.split(":")
            first, last = span.split("-")
            out.append((int(oid), int(first), int(last)))
        except ValueError:
            raise ConfigError(f"bad value for {key}: {item!r} (expected id:first-last)") from None
    return tuple(out)


def apply_overrides(base, entries: dict[str, str], prefix: str = ""):
    """Return a copy of dataclass ``base`` with ``entries`` applied field by field."""
    hints = typing.get_type_hints(type(base))
    fields = {f.name for f in dataclasses.fields(base)}
    changes = {}
    nested: dict[str, dict[str, str]] = {}
    for key, raw in entries.items():
        head, _, rest = key.partition(".")
        full = prefix + key
        if head not in fields:
            raise ConfigError(f"unknown config key: {full}")
        current = getattr(base, head)
        if rest:
            if not dataclasses.is_dataclass(current):
                raise ConfigError(f"unknown config key: {full}")
            nested.setdefault(head, {})[rest] = raw
        elif dataclasses.is_dataclass(current):
            raise ConfigError(f"{full} is a section; set {full}.<field> instead")
        elif head == "occlusions":
            changes[head] = _parse_occlusions(full, raw)
        else:
            changes[head] = _convert(full, raw, hints[head])
    for head, sub in nested.items():
        changes[head] = apply_overrides(getattr(base, head), sub, prefix + head + ".")
    try:
        return dataclasses.replace(base, **changes)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def flatten_config(cfg, prefix: str = "") -> dict[str, object]:
    out: dict[str, object] = {}
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if dataclasses.is_dataclass(value):
            out.update(flatten_config(value, prefix + f.name + "."))
        elif isinstance(value, tuple):
            out[prefix + f.name] = [list(v) if isinstance(v, tuple) else v for v in value]
        else:
            out[prefix + f.name] = value
    return out


def load_tracker_config(path=None) -> TrackerConfig:
    if path is None:
        return TrackerConfig()
    return apply_overrides(TrackerConfig(), parse_flat(Path(path).read_text()))


def load_synth_config(path=None) -> SynthConfig:
    if path is None:
        return SynthConfig()
    return apply_overrides(SynthConfig(), parse_flat(Path(path).read_text()))
