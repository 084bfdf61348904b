"""YAML run configuration.

Every tool in the package is driven by one config file with fixed sections.
Unknown sections or keys are rejected up front so typos fail before any
compute is spent.  The config hash (sha-256 of the fully resolved settings)
is stamped into logs and checkpoints.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, fields

import yaml

from .demo_tasks import TASKS
from .gait import GaitCommand
from .lowlevel import PpoConfig
from .randomize import RandomizationRanges
from .rewards import RewardWeights


class ConfigError(ValueError):
    pass


@dataclass
class DiffusionSettings:
    horizon: int = 16
    execute_k: int = 8
    history: int = 2
    ddim_steps: int = 16
    train_steps: int = 100
    epochs: int = 60
    batch_size: int = 64
    learning_rate: float = 1e-3

    def __post_init__(self):
        if not 1 <= self.execute_k <= self.horizon:
            raise ConfigError("execute_k must lie in [1, horizon]")
        if not 1 <= self.ddim_steps <= self.train_steps:
            raise ConfigError("ddim_steps must lie in [1, train_steps]")
        for name in ("horizon", "history", "epochs", "batch_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")


@dataclass
class RuntimeSettings:
    base_hz: float = 200.0
    leg_divisor: int = 4
    arm_divisor: int = 20
    high_level_divisor: int = 100
    duration_s: float = 8.0
    pushes: bool = False

    def __post_init__(self):
        if self.base_hz <= 0 or self.duration_s <= 0:
            raise ConfigError("base_hz and duration_s must be positive")
        for name in ("leg_divisor", "arm_divisor", "high_level_divisor"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")


@dataclass
class WorldSettings:
    object_width_mm: float = 30.0
    fragility_n: float = 8.0

    def __post_init__(self):
        if self.object_width_mm <= 0 or self.fragility_n <= 0:
            raise ConfigError("object width and fragility must be positive")


@dataclass
class ArmSettings:
    mode: str = "residual"

    def __post_init__(self):
        if self.mode not in ("residual", "direct"):
            raise ConfigError("arm mode must be 'residual' or 'direct'")


@dataclass
class TaskSettings:
    names: tuple = TASKS
    demos_per_task: int = 8

    def __post_init__(self):
        self.names = tuple(self.names)
        unknown = set(self.names) - set(TASKS)
        if unknown:
            raise ConfigError(f"unknown tasks {sorted(unknown)}; known: {TASKS}")
        if not self.names:
            raise ConfigError("at least one task is required")
        if self.demos_per_task < 1:
            raise ConfigError("demos_per_task must be >= 1")


_SECTION_TYPES = {
    "gait": GaitCommand,
    "rewards": RewardWeights,
    "randomization": RandomizationRanges,
    "ppo": PpoConfig,
    "diffusion": DiffusionSettings,
    "runtime": RuntimeSettings,
    "world": WorldSettings,
    "arm": ArmSettings,
    "tasks": TaskSettings,
}


@dataclass
class RunConfig:
    seed: int = 0
    gait: GaitCommand = field(default_factory=GaitCommand)
    rewards: RewardWeights = field(default_factory=RewardWeights)
    randomization: RandomizationRanges = field(default_factory=RandomizationRanges)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    diffusion: DiffusionSettings = field(default_factory=DiffusionSettings)
    runtime: RuntimeSettings = field(default_factory=RuntimeSettings)
    world: WorldSettings = field(default_factory=WorldSettings)
    arm: ArmSettings = field(default_factory=ArmSettings)
    tasks: TaskSettings = field(default_factory=TaskSettings)

    def as_dict(self) -> dict:
        out = {"seed": self.seed}
        for name, typ in _SECTION_TYPES.items():
            section = getattr(self, name)
            row = {}
            for f in fields(typ):
                v = getattr(section, f.name)
                if isinstance(v, tuple):
                    v = list(v)
                row[f.name] = v
            out[name] = row
        return out

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _build_section(name: str, raw: dict):
    typ = _SECTION_TYPES[name]
    if not isinstance(raw, dict):
        raise ConfigError(f"section '{name}' must be a mapping")
    known = {f.name for f in fields(typ)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown keys in section '{name}': {sorted(unknown)}")
    kwargs = {}
    for f in fields(typ):
        if f.name in raw:
            v = raw[f.name]
            if isinstance(v, list):
                v = tuple(v)
            kwargs[f.name] = v
    try:
        return typ(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid section '{name}': {exc}") from exc


def config_from_dict(raw: dict) -> RunConfig:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(raw) - set(_SECTION_TYPES) - {"seed"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    kwargs = {"seed": seed}
    for name in _SECTION_TYPES:
        if name in raw:
            kwargs[name] = _build_section(name, raw[name])
    return RunConfig(**kwargs)


def load_config(path) -> RunConfig:
    try:
        with open(path) as f:
            raw = yaml.safe_load(f)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from exc
    return config_from_dict(raw)


def save_config(config: RunConfig, path):
    with open(path, "w") as f:
        yaml.safe_dump(config.as_dict(), f, sort_keys=True)
