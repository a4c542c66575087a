"""TOML loading with strict key checking and line numbers in errors."""

from __future__ import annotations

import re
from pathlib import Path
from typing import Any, Iterable, Mapping

import tomli


class ConfigError(ValueError):
    """Bad configuration; ``line``/``col`` are 1-based when known."""

    category = "config"

    def __init__(self, message: str, source: str = "<config>", line: int | None = None, col: int | None = None):
        self.source, self.line, self.col = source, line, col
        where = source if line is None else f"{source}:{line}:{col or 1}"
        super().__init__(f"{where}: {message}")


def parse_toml(text: str, source: str = "<config>") -> dict[str, Any]:
    try:
        return tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = re.search(r"\(at line (\d+), column (\d+)\)", str(exc))
        line, col = (int(m.group(1)), int(m.group(2))) if m else (None, None)
        msg = re.sub(r"\s*\(at line \d+, column \d+\)", "", str(exc))
        raise ConfigError(msg, source, line, col) from None


def load_toml(path: str | Path) -> tuple[dict[str, Any], str]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read: {exc.strerror}", str(path)) from None
    return parse_toml(text, str(path)), text


def locate_key(text: str, key: str) -> tuple[int | None, int | None]:
    """First line/column where ``key`` appears as a TOML key."""
    pat = re.compile(rf"^(\s*)(\[\[?)?[\w.\"-]*?\b{re.escape(key)}\b")
    for i, line in enumerate(text.splitlines(), 1):
        m = pat.match(line)
        if m:
            return i, line.index(key) + 1
    return None, None


def check_keys(table: Mapping[str, Any], allowed: Iterable[str], section: str, text: str = "",
               source: str = "<config>") -> None:
    allowed = set(allowed)
    for key in table:
        if key not in allowed:
            line, col = locate_key(text, key) if text else (None, None)
            name = f"{section}.{key}" if section else key
            raise ConfigError(f"unknown key {name!r}", source, line, col)
