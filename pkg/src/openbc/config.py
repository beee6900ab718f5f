"""Run configuration: nested dataclasses backed by a YAML file."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from .models import MODELS

PRESETS = ("zero", "constant", "pulse", "sine", "standing_wave", "manufactured", "random")
DATA_KINDS = ("zero", "constant", "sinusoid", "exact")
TRANSFORMS = ("eig", "congruence")


class ConfigError(ValueError):
    pass


@dataclass
class InitialData:
    preset: str = "zero"
    amplitude: float = 1.0
    center: float = 0.5
    width: float = 0.1
    frequency: float = 1.0
    phase: float = 0.0
    value: Optional[list] = None


@dataclass
class ModelConfig:
    name: str = "burgers"
    epsilon: float = 0.0
    initial: InitialData = field(default_factory=InitialData)


@dataclass
class GridConfig:
    N: int = 101
    order: int = 2


@dataclass
class TimeConfig:
    t_final: float = 1.0
    cfl: float = 0.25
    speed_floor: float = 1.0


@dataclass
class DataSpec:
    """Boundary data g(t): zero, constant, sinusoid or exact (manufactured)."""

    kind: str = "zero"
    amplitude: list = field(default_factory=lambda: [1.0])
    frequency: float = 1.0
    phase: float = 0.0


@dataclass
class BoundaryConfig:
    R: Optional[list] = None
    S: Optional[list] = None
    r: float = 0.0
    s: float = 1.0
    G: DataSpec = field(default_factory=DataSpec)
    trace: Optional[list] = None


@dataclass
class OutputConfig:
    dir: str = "out"
    snapshot_every: int = 0


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    left: BoundaryConfig = field(default_factory=BoundaryConfig)
    right: BoundaryConfig = field(default_factory=BoundaryConfig)
    transformation: str = "eig"
    output: OutputConfig = field(default_factory=OutputConfig)
    seed: int = 0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)

    @classmethod
    def from_dict(cls, data: Optional[dict]) -> "RunConfig":
        cfg = _build(cls, data or {}, "")
        validate(cfg)
        return cfg

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
            raise ConfigError(f"cannot parse config{where}: {exc}") from None
        if data is not None and not isinstance(data, dict):
            raise ConfigError("config must be a mapping at top level")
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.loads(text)


def _build(cls, data: Any, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"section '{where or 'root'}' must be a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigError(f"unknown key(s) in '{where or 'root'}': {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        sub = _NESTED.get((cls, name))
        path = f"{where}.{name}" if where else name
        kwargs[name] = _build(sub, value, path) if sub else value
    return cls(**kwargs)


_NESTED = {
    (RunConfig, "model"): ModelConfig,
    (RunConfig, "grid"): GridConfig,
    (RunConfig, "time"): TimeConfig,
    (RunConfig, "left"): BoundaryConfig,
    (RunConfig, "right"): BoundaryConfig,
    (RunConfig, "output"): OutputConfig,
    (ModelConfig, "initial"): InitialData,
    (BoundaryConfig, "G"): DataSpec,
}


def _number(value, where, *, integer=False) -> None:
    ok = isinstance(value, int) if integer else isinstance(value, (int, float))
    if isinstance(value, bool) or not ok or not math.isfinite(value):
        kind = "an integer" if integer else "a finite number"
        raise ConfigError(f"{where} must be {kind}, got {value!r}")


def _matrix(value, where) -> None:
    if value is None:
        return
    rows = value if isinstance(value, list) else [[value]]
    rows = [r if isinstance(r, list) else [r] for r in rows]
    if len({len(r) for r in rows}) > 1:
        raise ConfigError(f"{where} rows have unequal lengths")
    for r in rows:
        for v in r:
            _number(v, where)


def validate(cfg: RunConfig) -> None:
    m = cfg.model
    if m.name not in MODELS:
        raise ConfigError(f"model.name must be one of {sorted(MODELS)}, got {m.name!r}")
    _number(m.epsilon, "model.epsilon")
    if m.epsilon < 0:
        raise ConfigError("model.epsilon must be non-negative")
    init = m.initial
    if init.preset not in PRESETS:
        raise ConfigError(f"model.initial.preset must be one of {PRESETS}, got {init.preset!r}")
    for key in ("amplitude", "center", "width", "frequency", "phase"):
        _number(getattr(init, key), f"model.initial.{key}")
    if init.value is not None:
        for v in init.value:
            _number(v, "model.initial.value")
    _number(cfg.grid.N, "grid.N", integer=True)
    _number(cfg.grid.order, "grid.order", integer=True)
    if cfg.grid.order not in (2, 4):
        raise ConfigError("grid.order must be 2 or 4")
    minimum = 2 if cfg.grid.order == 2 else 8
    if cfg.grid.N < minimum:
        raise ConfigError(f"grid.N must be >= {minimum} for order {cfg.grid.order}")
    for key in ("t_final", "cfl", "speed_floor"):
        _number(getattr(cfg.time, key), f"time.{key}")
    if cfg.time.t_final < 0 or cfg.time.cfl <= 0 or cfg.time.speed_floor <= 0:
        raise ConfigError("time.t_final must be >= 0; time.cfl and time.speed_floor must be > 0")
    for side in ("left", "right"):
        b = getattr(cfg, side)
        _matrix(b.R, f"{side}.R")
        _matrix(b.S, f"{side}.S")
        _number(b.r, f"{side}.r")
        _number(b.s, f"{side}.s")
        if b.G.kind not in DATA_KINDS:
            raise ConfigError(f"{side}.G.kind must be one of {DATA_KINDS}, got {b.G.kind!r}")
        amp = b.G.amplitude if isinstance(b.G.amplitude, list) else [b.G.amplitude]
        for v in amp:
            _number(v, f"{side}.G.amplitude")
        _number(b.G.frequency, f"{side}.G.frequency")
        _number(b.G.phase, f"{side}.G.phase")
        if b.trace is not None:
            for v in b.trace:
                _number(v, f"{side}.trace")
    if cfg.transformation not in TRANSFORMS:
        raise ConfigError(f"transformation must be one of {TRANSFORMS}")
    _number(cfg.output.snapshot_every, "output.snapshot_every", integer=True)
    _number(cfg.seed, "seed", integer=True)
