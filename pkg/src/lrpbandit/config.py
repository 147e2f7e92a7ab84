"""Experiment configuration as one JSON document.

Top level::

    {"p_A": 0.4, "p_B": 0.3333, "schedule": {"variant": "PowerLaw", ...},
     "x0": 0.5, "n_steps": 1000000, "seeds": {"master": 0, "count": 100},
     "jobs": 1, "pdmp": {...}, "density": {...}, "laplace": {...},
     "outputs": {...}, "compare": {...}}

``schedule`` and ``pdmp`` may be ``null``.  Unknown keys are rejected.
Overrides use dotted paths, e.g. ``pdmp.horizon=1e5``; the value is read
as JSON and kept as a string if that fails.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from .params import BanditParams, ScheduleSpec, schedule_from_dict, schedule_to_dict


class ConfigError(ValueError):
    pass


@dataclass
class SeedBlock:
    master: int = 0
    count: int = 1


@dataclass
class PdmpBlock:
    """Limit-process run; ``y0 = None`` starts at the stationary mean."""

    g: float = 1.0
    horizon: float = 1e6
    y0: Optional[float] = None
    burn_in: float = 0.1
    bin_width: float = 0.05
    bin_lo: Optional[float] = None  # defaults to r_A
    bin_hi: Optional[float] = None  # defaults to r_A + 40 g
    n_batches: int = 50


@dataclass
class DensityBlock:
    g: float = 1.0
    n_max: int = 60
    points_per_interval: int = 384
    grid_step: float = 0.01


@dataclass
class LaplaceBlock:
    g: float = 1.0
    p: list = field(default_factory=lambda: [0.0, 0.1, 0.5, 1.0, 2.0, 5.0])
    tol: float = 1e-10


@dataclass
class OutputBlock:
    directory: str = "out"
    trajectories: bool = True
    path: bool = True


@dataclass
class CompareBlock:
    empirical: Optional[str] = None
    analytic: Optional[str] = None
    l1_tol: float = 0.05
    mean_tol: float = 0.01
    var_tol: float = 0.05


_BLOCKS = {
    "seeds": SeedBlock,
    "pdmp": PdmpBlock,
    "density": DensityBlock,
    "laplace": LaplaceBlock,
    "outputs": OutputBlock,
    "compare": CompareBlock,
}


@dataclass
class ExperimentConfig:
    p_A: float
    p_B: float
    schedule: Optional[ScheduleSpec] = None
    x0: float = 0.5
    n_steps: int = 1000
    seeds: SeedBlock = field(default_factory=SeedBlock)
    jobs: int = 1
    pdmp: Optional[PdmpBlock] = None
    density: DensityBlock = field(default_factory=DensityBlock)
    laplace: LaplaceBlock = field(default_factory=LaplaceBlock)
    outputs: OutputBlock = field(default_factory=OutputBlock)
    compare: CompareBlock = field(default_factory=CompareBlock)

    @property
    def params(self) -> BanditParams:
        return BanditParams(self.p_A, self.p_B)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["schedule"] = None if self.schedule is None else schedule_to_dict(self.schedule)
        for name in _BLOCKS:
            block = d[name]
            d[name] = None if block is None else asdict(block)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        for key in ("p_A", "p_B"):
            if key not in d:
                raise ConfigError(f"missing required key {key!r}")
        try:
            if d.get("schedule") is not None:
                d["schedule"] = schedule_from_dict(d["schedule"])
            for name, block_cls in _BLOCKS.items():
                if name in d and d[name] is not None:
                    block = d[name]
                    if not isinstance(block, dict):
                        raise ConfigError(f"{name} must be an object")
                    allowed = {f.name for f in fields(block_cls)}
                    bad = set(block) - allowed
                    if bad:
                        raise ConfigError(f"unknown keys in {name}: {sorted(bad)}")
                    d[name] = block_cls(**block)
            cfg = cls(**d)
            cfg.params  # validates p_A, p_B
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        return cfg

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(d: dict, overrides: list[str]) -> dict:
    """Apply ``dotted.key=value`` assignments to a config dictionary."""
    d = json.loads(json.dumps(d))
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        parts = key.split(".")
        node = d
        for p in parts[:-1]:
            if node.get(p) is None:
                node[p] = {}
            node = node[p]
            if not isinstance(node, dict):
                raise ConfigError(f"{key}: {p} is not an object")
        node[parts[-1]] = _parse_value(value)
    return d


def load_config(path=None, overrides=(), base: dict | None = None) -> ExperimentConfig:
    """Read ``path`` (or start from ``base``), apply overrides and validate."""
    if path is not None:
        try:
            d = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from None
    else:
        d = dict(base or {})
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    return ExperimentConfig.from_dict(apply_overrides(d, list(overrides)))
