"""Run configuration and the plain-text ``key = value`` file format.

A configuration file is a flat list of ``key = value`` lines.  Blank lines and
lines starting with ``#`` are ignored.  Every key belongs either to
:class:`WorldConfig` (physics, topology, utility weights, discount, seed) or to
:class:`LearnConfig` (network, replay and exploration settings).  Unknown keys
are rejected.
"""
from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional


class ConfigError(ValueError):
    """Raised for malformed or inconsistent configuration."""


# -144 dBm/Hz expressed in W/Hz
DEFAULT_NOISE_DENSITY = 10.0 ** ((-144.0 - 30.0) / 10.0)


@dataclass
class WorldConfig:
    # geometry and topology
    grid_cells: int = 40            # cells per side of the square grid
    cell_size: float = 10.0         # meters
    num_bs: int = 4
    bs_positions: Optional[str] = None   # "x,y;x,y;..." in meters, default: block centers
    bs_adjacency: Optional[str] = None   # "0-1;1-3;..." default: rook-adjacent coverage
    uav_altitude: float = 100.0     # meters
    num_mus: int = 20

    # time, radio
    delta: float = 1.0              # epoch duration, seconds
    num_channels: int = 16
    bandwidth: float = 1e6          # Hz
    noise_density: float = DEFAULT_NOISE_DENSITY  # W/Hz
    p_max: float = 3.0              # W
    handover_delay: float = 1e-2    # seconds

    # tasks and computation
    arrival_prob: float = 0.3
    packets_per_task: int = 10
    bits_per_packet: float = 5e5
    cycles_per_bit: float = 1300.0
    cpu_freq: float = 1e9           # Hz
    capacitance: float = 1e-27
    vm_rate: float = 2e7            # bits/second, VM in isolation
    vm_interference: float = 0.2

    # utility
    aoi_max: float = 30.0           # seconds
    aoi_weight: float = 10.0
    energy_weight: float = 2.0
    discount: float = 0.9

    # channel gain model
    ground_gain_ref: float = 1e-4
    ground_exponent: float = 3.8
    air_gain_ref: float = 1.4e-4
    air_exponent: float = 2.0

    # mobility
    uav_static: bool = False

    seed: int = 0

    def validate(self) -> None:
        if self.grid_cells < 1 or self.cell_size <= 0:
            raise ConfigError("grid_cells and cell_size must be positive")
        if self.num_bs < 1:
            raise ConfigError("num_bs must be >= 1")
        if self.num_mus < 1:
            raise ConfigError("num_mus must be >= 1")
        if not self.delta > self.handover_delay >= 0:
            raise ConfigError("need delta > handover_delay >= 0")
        if not 0.0 <= self.arrival_prob <= 1.0:
            raise ConfigError("arrival_prob must lie in [0, 1]")
        if not 0.0 <= self.discount < 1.0:
            raise ConfigError("discount must lie in [0, 1)")
        if self.packets_per_task < 1:
            raise ConfigError("packets_per_task must be >= 1")
        if self.num_channels < 0:
            raise ConfigError("num_channels must be >= 0")
        for name in ("bandwidth", "noise_density", "p_max", "bits_per_packet",
                     "cycles_per_bit", "cpu_freq", "capacitance", "vm_rate",
                     "aoi_max", "ground_gain_ref", "air_gain_ref"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.vm_interference < 0:
            raise ConfigError("vm_interference must be non-negative")


@dataclass
class LearnConfig:
    epochs: int = 20000
    batch_size: int = 200
    memory_size: int = 5000
    hidden_units: int = 32
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    target_period: int = 100
    eps_start: float = 1.0
    eps_end: float = 0.02
    eps_decay_fraction: float = 0.5

    def validate(self) -> None:
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1 or self.memory_size < self.batch_size:
            raise ConfigError("need 1 <= batch_size <= memory_size")
        if self.hidden_units < 1 or self.target_period < 1:
            raise ConfigError("hidden_units and target_period must be >= 1")
        if not 0.0 <= self.eps_end <= self.eps_start <= 1.0:
            raise ConfigError("need 0 <= eps_end <= eps_start <= 1")
        if not 0.0 < self.eps_decay_fraction <= 1.0:
            raise ConfigError("eps_decay_fraction must lie in (0, 1]")


@dataclass
class RunConfig:
    world: WorldConfig = field(default_factory=WorldConfig)
    learn: LearnConfig = field(default_factory=LearnConfig)

    def validate(self) -> None:
        self.world.validate()
        self.learn.validate()

    def replace(self, **changes) -> "RunConfig":
        """Copy with flat ``key=value`` overrides routed to the right section."""
        world = dataclasses.replace(self.world)
        learn = dataclasses.replace(self.learn)
        for key, value in changes.items():
            if key in _WORLD_KEYS:
                setattr(world, key, value)
            elif key in _LEARN_KEYS:
                setattr(learn, key, value)
            else:
                raise ConfigError(f"unknown configuration key {key!r}")
        return RunConfig(world, learn)

    def digest(self) -> str:
        return hashlib.sha256(dumps(self).encode()).hexdigest()[:16]


_WORLD_KEYS = {f.name: f for f in fields(WorldConfig)}
_LEARN_KEYS = {f.name: f for f in fields(LearnConfig)}


def _parse_value(key: str, raw: str, ftype, lineno: int):
    raw = raw.strip()
    try:
        if ftype in (int, "int"):
            return int(raw)
        if ftype in (float, "float"):
            return float(raw)
        if ftype in (bool, "bool"):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        # Optional[str]
        if raw.lower() in ("", "none"):
            return None
        return raw
    except ValueError:
        raise ConfigError(f"line {lineno}: bad value {raw!r} for {key}") from None


def loads(text: str) -> RunConfig:
    world, learn = WorldConfig(), LearnConfig()
    seen = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {stripped!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        if key in _WORLD_KEYS:
            target, spec = world, _WORLD_KEYS[key]
        elif key in _LEARN_KEYS:
            target, spec = learn, _LEARN_KEYS[key]
        else:
            raise ConfigError(f"line {lineno}: unknown configuration key {key!r}")
        setattr(target, key, _parse_value(key, raw, spec.type, lineno))
    cfg = RunConfig(world, learn)
    cfg.validate()
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return loads(text)


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value)


def dumps(cfg: RunConfig) -> str:
    lines = ["# world"]
    lines += [f"{f.name} = {_format(getattr(cfg.world, f.name))}" for f in fields(WorldConfig)]
    lines.append("# learning")
    lines += [f"{f.name} = {_format(getattr(cfg.learn, f.name))}" for f in fields(LearnConfig)]
    return "\n".join(lines) + "\n"


def desk_config(seed: int = 0) -> RunConfig:
    """Small profile used by the test-suite: 3 MUs on an 8x8 grid, 2 channels."""
    world = WorldConfig(grid_cells=8, num_mus=3, num_channels=2, packets_per_task=4,
                        arrival_prob=0.5, seed=seed)
    learn = LearnConfig(epochs=20000, batch_size=32, memory_size=5000)
    return RunConfig(world, learn)


def full_config(seed: int = 0) -> RunConfig:
    """Full-size profile: 20 MUs, 1600 locations, full-size constants."""
    return RunConfig(WorldConfig(seed=seed), LearnConfig(epochs=20000, batch_size=200))
