"""Run configuration: bundled defaults, a user TOML file and ``--set`` overrides.

The bundled ``default.toml`` doubles as the schema.  A user file may only
use keys that appear there, with values of the same type (integers are
accepted where floats are expected).
"""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

from ._toml import ConfigError, load_toml, locate_key, parse_toml

OUT_ENV = "NMSIM_OUT"


def default_text() -> str:
    return resources.files("nmsim").joinpath("data/default.toml").read_text()


def defaults() -> dict[str, Any]:
    return parse_toml(default_text(), "default.toml")


def _type_ok(ref: Any, value: Any) -> bool:
    if isinstance(ref, bool) or isinstance(value, bool):
        return isinstance(ref, bool) and isinstance(value, bool)
    if isinstance(ref, float):
        return isinstance(value, (int, float))
    if isinstance(ref, list):
        return isinstance(value, list) and all(
            _type_ok(ref[0], v) if ref else True for v in value
        )
    return isinstance(value, type(ref))


def _merge(base: dict, user: dict, path: str, text: str, source: str) -> None:
    for key, value in user.items():
        name = f"{path}.{key}" if path else key
        if key not in base:
            line, col = locate_key(text, key) if text else (None, None)
            raise ConfigError(f"unknown key {name!r}", source, line, col)
        ref = base[key]
        if isinstance(ref, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{name!r} must be a table", source, *locate_key(text, key))
            _merge(ref, value, name, text, source)
            continue
        if not _type_ok(ref, value):
            line, col = locate_key(text, key) if text else (None, None)
            raise ConfigError(
                f"{name!r} expects {type(ref).__name__}, got {type(value).__name__}", source, line, col
            )
        base[key] = float(value) if isinstance(ref, float) else value
        if isinstance(ref, list) and ref and isinstance(ref[0], float):
            base[key] = [float(v) for v in value]


def parse_override(item: str) -> tuple[list[str], Any]:
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not key=value", "--set")
    key, raw = item.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError(f"override {item!r} has an empty key", "--set")
    try:
        value = parse_toml(f"v = {raw.strip()}", "--set")["v"]
    except ConfigError:
        value = raw.strip()
    return key.split("."), value


@dataclass
class RunConfig:
    data: dict[str, Any]
    source: str = "defaults"

    def __getitem__(self, section: str) -> dict[str, Any]:
        return self.data[section]

    @property
    def seed(self) -> int:
        return self.data["run"]["seed"]

    def out_dir(self) -> Path:
        out = self.data["run"]["out"] or os.environ.get(OUT_ENV, "") or "out"
        return Path(out)


def load_config(path: str | Path | None = None, overrides: Sequence[str] = (), seed: int | None = None,
                out: str | None = None) -> RunConfig:
    data = copy.deepcopy(defaults())
    source = "defaults"
    if path is not None:
        user, text = load_toml(path)
        source = str(path)
        _merge(data, user, "", text, source)
    for item in overrides:
        keys, value = parse_override(item)
        nested: dict[str, Any] = value
        for k in reversed(keys):
            nested = {k: nested}
        _merge(data, nested, "", "", f"--set {item}")
    if seed is not None:
        data["run"]["seed"] = seed
    if out is not None:
        data["run"]["out"] = out
    return RunConfig(data, source)
