"""Experiment configurations, result records and versioned thresholds."""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

__all__ = [
    "ExperimentConfig", "ResultRecord", "ConfigError", "KINDS", "OUT_ENV", "default_config", "load_config",
    "thresholds", "output_dir",
]

KINDS = ("cardy", "exit-law", "loops", "conformal")
OUT_ENV = "CRITPERC_OUT"


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    kind: str
    domain: str
    deltas: list = field(default_factory=list)
    epsilons: list = field(default_factory=list)
    n: int = 1000
    seed: int = 0
    out: str | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.n < 1:
            raise ConfigError("sample count must be positive")
        if any(not 0 < d < 1 for d in self.deltas):
            raise ConfigError("mesh sizes must lie in (0, 1)")
        if any(e <= 0 for e in self.epsilons):
            raise ConfigError("epsilons must be positive")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {k: d[k] for k in ("kind", "domain", "deltas", "epsilons", "n", "seed", "out", "params") if k in d}
        extra = set(d) - set(known)
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        return cls(**known)


@dataclass
class ResultRecord:
    experiment: str
    params: dict
    estimate: float
    stderr: float = float("nan")
    oracle: float = float("nan")
    statistic: float = float("nan")
    wall_time: float = 0.0
    passed: bool | None = None

    def row(self) -> dict:
        d = asdict(self)
        d["params"] = json.dumps(self.params, sort_keys=True)
        return d


def _fixture(name: str) -> dict:
    return json.loads(resources.files("critperc.harness").joinpath("fixtures").joinpath(name).read_text())


def thresholds() -> dict:
    return _fixture("thresholds.json")


def default_config(kind: str) -> ExperimentConfig:
    d = _fixture("defaults.json")
    if kind not in d:
        raise ConfigError(f"no defaults for {kind!r}")
    return ExperimentConfig(kind=kind, **d[kind])


def load_config(path: str | Path, kind: str) -> ExperimentConfig:
    """A config file holds one experiment or a mapping from kind to
    experiment; missing fields come from the defaults for ``kind``."""
    try:
        d = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if kind in d and isinstance(d[kind], dict):
        d = d[kind]
    d = dict(d)
    if d.pop("kind", kind) != kind:
        raise ConfigError(f"config is not for {kind!r}")
    base = asdict(default_config(kind))
    base.pop("kind")
    params = {**base.pop("params"), **d.pop("params", {})}
    base.update(d)
    return ExperimentConfig.from_dict({"kind": kind, **base, "params": params})


def output_dir(flag: str | None = None) -> Path:
    return Path(flag or os.environ.get(OUT_ENV) or "critperc-out")
