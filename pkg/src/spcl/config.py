"""Flat ``key = value`` run configuration files.

Relative dataset paths inside a config file resolve against the file's directory.
"""
from __future__ import annotations

import typing
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import ConfigError
from .trainer import TrainConfig

_TRUE = {"on", "true", "yes", "1"}
_FALSE = {"off", "false", "no", "0"}


@dataclass
class RunConfig(TrainConfig):
    train_path: str = ""
    dev_path: str = ""
    test_path: str = ""
    labels: tuple = ()
    out: str = "out"
    seeds: tuple = (0, 1, 2, 3, 4)
    batch_sizes: tuple = (4, 8, 16, 32)
    losses: tuple = ("supcon", "spcl")

    def train_config(self, **overrides) -> TrainConfig:
        names = [f.name for f in fields(TrainConfig)]
        return replace(TrainConfig(**{n: getattr(self, n) for n in names}), **overrides)


_PATH_KEYS = ("train_path", "dev_path", "test_path")
_TUPLE_TYPES = {"labels": str, "seeds": int, "batch_sizes": int, "losses": str}


def parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def parse_value(key: str, text: str):
    types = typing.get_type_hints(RunConfig)
    if key not in types:
        raise ConfigError(f"unknown config key {key!r}")
    if key in _TUPLE_TYPES:
        conv = _TUPLE_TYPES[key]
        try:
            return tuple(conv(p.strip()) for p in text.split(",") if p.strip())
        except ValueError:
            raise ConfigError(f"{key}: cannot parse {text!r}") from None
    typ = types[key]
    try:
        if typ is bool:
            return parse_bool(text)
        if typ is int:
            return int(text)
        if typ is float:
            return float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {typ.__name__}") from None
    return text.strip()


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        try:
            values[key] = parse_value(key, val)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
    return values


def load_run_config(path=None, **overrides) -> RunConfig:
    values = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                values = parse_config_text(fh.read(), str(path))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        base = Path(path).parent
        for key in _PATH_KEYS:
            if values.get(key) and not Path(values[key]).is_absolute():
                values[key] = str(base / values[key])
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values)


def dump_config(cfg: RunConfig) -> str:
    lines = []
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        elif isinstance(v, bool):
            v = "on" if v else "off"
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
