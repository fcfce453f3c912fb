"""Run configuration and its flat ``key = value`` file format."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields
from pathlib import Path

from .heuristics import DEFAULTS as HEURISTIC_DEFAULTS
from .model import MODES

HEURISTICS = ("cn", "aa", "ra", "katz", "rwr", "lp", "lrw")
METHODS = MODES + HEURISTICS
HEURISTIC_PARAMS = {"katz": "beta", "rwr": "c", "lp": "alpha", "lrw": "t"}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    dataset: str
    method: str = "trihet"
    feature_source: str = "anchor"
    # graph the anchor distances are measured on: "full" or "train"
    feature_graph: str = "full"
    ratios: tuple = (0.85, 0.05, 0.10)
    seed: int = 42
    repeats: int = 10
    epochs: int = 1000
    patience: int = 500
    dropout: float = 0.1
    lr: float = 0.01
    hidden: int = 128
    scalar_lr: float = 0.001
    layers: int = 2
    act: str = "relu"
    beta: float | None = None
    c: float | None = None
    alpha: float | None = None
    t: int | None = None
    allow_large: bool = False

    def __post_init__(self):
        self.validate()

    @property
    def is_heuristic(self) -> bool:
        return self.method in HEURISTICS

    def validate(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.feature_source not in ("intrinsic", "anchor"):
            raise ConfigError(f"feature_source must be intrinsic or anchor, not {self.feature_source!r}")
        if self.feature_graph not in ("full", "train"):
            raise ConfigError(f"feature_graph must be full or train, not {self.feature_graph!r}")
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")
        given = {p for p in ("beta", "c", "alpha", "t") if getattr(self, p) is not None}
        allowed = {HEURISTIC_PARAMS[self.method]} if self.method in HEURISTIC_PARAMS else set()
        if given - allowed:
            raise ConfigError(f"parameter(s) {sorted(given - allowed)} do not apply to method {self.method}")

    def heuristic_params(self) -> dict:
        if self.method not in HEURISTIC_PARAMS:
            return {}
        key = HEURISTIC_PARAMS[self.method]
        val = getattr(self, key)
        return {key: HEURISTIC_DEFAULTS[self.method][key] if val is None else val}

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(repr(x) for x in v)
            lines.append(f"{f.name} = {'' if v is None else v}")
        return "\n".join(lines) + "\n"

    def hash(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:12]

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        kinds = {f.name: f.type for f in fields(cls)}
        kv = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key = value")
            k, v = (s.strip() for s in line.split("=", 1))
            if k not in kinds:
                raise ConfigError(f"line {lineno}: unknown key {k!r}")
            kv[k] = _parse(k, v, kinds[k])
        if "dataset" not in kv:
            raise ConfigError("config lacks a dataset")
        return cls(**kv)

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_text(Path(path).read_text())


def _parse(key, raw: str, kind):
    kind = str(kind)
    if raw == "":
        return None
    if key == "ratios":
        return tuple(float(x) for x in raw.split(","))
    if "bool" in kind:
        return raw.lower() in ("1", "true", "yes")
    if "int" in kind:
        return int(raw)
    if "float" in kind:
        return float(raw)
    return raw
