"""Flat `key = value` run configuration: parse, merge, persist.

Precedence: command-line overrides > config file > per-command defaults.
Unknown and duplicate keys are rejected rather than ignored.
"""
from __future__ import annotations

from .errors import ConfigError


def parse_config_text(text: str) -> dict:
    """Parse `key = value` lines; `#` starts a comment, blank lines ignored."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected `key = value`")
        key, val = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"config line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"config line {lineno}: duplicate key {key!r}")
        out[key] = val
    return out


def load_config_file(path) -> dict:
    try:
        with open(path) as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc


def _coerce(key: str, raw: str, default):
    kind = type(default)
    try:
        if kind is bool:
            lowered = raw.lower()
            if lowered in ("true", "1", "yes"):
                return True
            if lowered in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(
            f"config key {key!r}: cannot parse {raw!r} as {kind.__name__}") from None


def resolve_config(defaults: dict, file_cfg: dict | None = None,
                   overrides: dict | None = None) -> dict:
    """Merge file values and overrides onto typed defaults.

    defaults fixes the key set and the types; file values are strings and get
    coerced; overrides are already typed (or None, meaning unset).
    """
    out = dict(defaults)
    for key, raw in (file_cfg or {}).items():
        if key not in defaults:
            raise ConfigError(f"unknown config key {key!r}")
        out[key] = _coerce(key, raw, defaults[key])
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key not in defaults:
            raise ConfigError(f"unknown config key {key!r}")
        out[key] = val
    return out


def dump_config(cfg: dict, path):
    """Write the resolved configuration, keys sorted, one `key = value` per line."""
    lines = [f"{k} = {cfg[k]}" for k in sorted(cfg)]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
