"""Flat ``key = value`` text files with a versioned ``#`` header.

Every file written here starts with a line ``# junctionflow <kind> v<version>``,
optionally followed by further ``# key: value`` metadata lines.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Mapping

from .errors import ConfigError

TOOL_VERSION = "0.1.0"


def header_lines(kind: str, version: int = 1, meta: Mapping[str, object] | None = None) -> list[str]:
    lines = [f"# junctionflow {kind} v{version}"]
    for key, value in (meta or {}).items():
        lines.append(f"# {key}: {value}")
    return lines


def config_hash(config: Mapping[str, object]) -> str:
    blob = json.dumps({k: str(v) for k, v in sorted(config.items())}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def write_kv(path, kind: str, items: Mapping[str, object], meta: Mapping[str, object] | None = None) -> None:
    lines = header_lines(kind, meta=meta)
    for key, value in items.items():
        if isinstance(value, float):
            value = repr(float(value))
        lines.append(f"{key} = {value}")
    Path(path).write_text("\n".join(lines) + "\n")


def parse_kv(text: str, source: str = "<string>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def read_kv(path, kind: str | None = None) -> dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"file not found: {path}")
    text = path.read_text()
    if kind is not None:
        first = text.splitlines()[0] if text else ""
        if not first.startswith(f"# junctionflow {kind} "):
            raise ConfigError(f"{path}: not a '{kind}' file (header {first!r})")
    return parse_kv(text, str(path))
