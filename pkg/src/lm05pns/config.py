"""Flat ``key = value`` parameter files with ``#`` comments."""

from __future__ import annotations

from pathlib import Path


class ConfigError(ValueError):
    pass


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def read_config(path: str | Path) -> dict[str, str]:
    """Return raw string values keyed by normalised name (``-`` -> ``_``)."""
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    out: dict[str, str] = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        out[key.replace("-", "_").lower()] = value
    return out


def resolve(
    defaults: dict[str, object],
    file_values: dict[str, str],
    flag_values: dict[str, object],
) -> dict[str, object]:
    """Merge defaults <- config file <- flags, converting file strings.

    Each file value is converted with the type of its default. Keys missing
    from ``defaults`` are rejected.
    """
    merged = dict(defaults)
    for key, text in file_values.items():
        if key not in defaults:
            raise ConfigError(f"unknown config key {key!r}")
        merged[key] = _convert(key, text, defaults[key])
    for key, value in flag_values.items():
        if value is not None and key in defaults:
            merged[key] = value
    return merged


def _convert(key: str, text: str, default: object) -> object:
    try:
        if isinstance(default, bool):
            return parse_bool(text)
        if isinstance(default, int):
            return int(text, 0)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, (list, tuple)):
            return [float(x) for x in text.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {text!r}") from exc
    return text
