"""Flat ``key = value`` configuration files.

Lines outside any block go to the top-level mapping. A line ``[name]`` opens a
new block; blocks with the same name may repeat and are collected in order.
``#`` starts a comment. Values are kept as strings; typed access goes through
:meth:`Config.get_float` and friends so that a missing key falls back to the
caller's default.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path


class ConfigError(ValueError):
    pass


@dataclass
class Config:
    values: dict[str, str] = field(default_factory=dict)
    blocks: list[tuple[str, dict[str, str]]] = field(default_factory=list)

    def get(self, key: str, default: str | None = None) -> str | None:
        return self.values.get(key, default)

    def get_float(self, key: str, default: float) -> float:
        raw = self.values.get(key)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: expected a number, got {raw!r}") from exc

    def get_int(self, key: str, default: int) -> int:
        raw = self.values.get(key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: expected an integer, got {raw!r}") from exc

    def get_list(self, key: str, default: list[str] | None = None) -> list[str]:
        raw = self.values.get(key)
        if raw is None:
            return list(default or [])
        return [item.strip() for item in raw.split(",") if item.strip()]

    def blocks_named(self, name: str) -> list[dict[str, str]]:
        return [body for block, body in self.blocks if block == name]


def parse_config(text: str) -> Config:
    cfg = Config()
    current = cfg.values
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            body: dict[str, str] = {}
            cfg.blocks.append((line[1:-1].strip(), body))
            current = body
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        current[key] = value.strip()
    return cfg


def load_config(path: str | Path | None) -> Config:
    if path is None:
        return Config()
    return parse_config(Path(path).read_text(encoding="utf-8"))


def parse_clock(value: str) -> float:
    """Seconds since midnight from ``HH:MM[:SS]``, or plain seconds."""
    if ":" not in value:
        return float(value)
    parts = [float(p) for p in value.split(":")]
    while len(parts) < 3:
        parts.append(0.0)
    h, m, s = parts
    return h * 3600.0 + m * 60.0 + s
