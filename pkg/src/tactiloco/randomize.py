"""Per-episode domain randomization and periodic push perturbations.

All command randomization is expressed in the quadruped base frame; all
distributions are uniform over their configured ranges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np


@dataclass
class RandomizationRanges:
    friction: tuple[float, float] = (0.3, 3.0)
    base_mass_offset_kg: tuple[float, float] = (0.0, 2.5)
    com_shift_m: tuple[float, float] = (-0.15, 0.15)        # per axis
    motor_strength: tuple[float, float] = (0.7, 1.3)
    gripper_mass_offset_kg: tuple[float, float] = (0.0, 0.3)
    vx_cmd: tuple[float, float] = (-0.8, 0.8)               # m/s
    vy_cmd: tuple[float, float] = (-0.8, 0.8)               # m/s
    wz_cmd: tuple[float, float] = (-0.8, 0.8)               # rad/s
    init_pos_perturb_m: tuple[float, float] = (0.0, 0.5)    # radial, within 0.5 m
    init_yaw_rad: tuple[float, float] = (-math.pi / 2, math.pi / 2)
    init_vel_perturb_ms: tuple[float, float] = (0.0, 0.1)   # radial, within 0.1 m/s
    init_joint_scale: tuple[float, float] = (0.8, 1.2)

    def __post_init__(self):
        for name, (lo, hi) in self.items():
            if lo > hi:
                raise ValueError(f"range {name} has lo > hi")

    def items(self):
        return [(f, tuple(getattr(self, f))) for f in self.__dataclass_fields__]


@dataclass
class EpisodeDraw:
    seed: int
    friction: float
    base_mass_offset_kg: float
    com_shift_m: np.ndarray           # (3,)
    motor_strength: float
    gripper_mass_offset_kg: float
    vx_cmd: float
    vy_cmd: float
    wz_cmd: float
    init_pos_perturb_m: np.ndarray    # (2,) planar
    init_yaw_rad: float
    init_vel_perturb_ms: np.ndarray   # (2,) planar
    init_joint_scale: float

    def as_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, np.ndarray):
                d[k] = v.tolist()
        return d


def draw_episode(ranges: RandomizationRanges, seed: int) -> EpisodeDraw:
    """One uniform sample per randomization item; fully determined by seed."""
    rng = np.random.default_rng(seed)

    def u(pair):
        return float(rng.uniform(pair[0], pair[1]))

    def planar(max_radius_pair):
        r = rng.uniform(max_radius_pair[0], max_radius_pair[1])
        ang = rng.uniform(0.0, 2.0 * math.pi)
        return np.array([r * math.cos(ang), r * math.sin(ang)])

    return EpisodeDraw(
        seed=seed,
        friction=u(ranges.friction),
        base_mass_offset_kg=u(ranges.base_mass_offset_kg),
        com_shift_m=rng.uniform(ranges.com_shift_m[0], ranges.com_shift_m[1], size=3),
        motor_strength=u(ranges.motor_strength),
        gripper_mass_offset_kg=u(ranges.gripper_mass_offset_kg),
        vx_cmd=u(ranges.vx_cmd),
        vy_cmd=u(ranges.vy_cmd),
        wz_cmd=u(ranges.wz_cmd),
        init_pos_perturb_m=planar(ranges.init_pos_perturb_m),
        init_yaw_rad=u(ranges.init_yaw_rad),
        init_vel_perturb_ms=planar(ranges.init_vel_perturb_ms),
        init_joint_scale=u(ranges.init_joint_scale),
    )


@dataclass
class PushSchedule:
    """Random planar velocity pushes every `interval_s`, magnitude capped."""

    interval_s: float = 3.0
    max_magnitude_ms: float = 0.5
    _next_time: float = field(init=False)

    def __post_init__(self):
        self._next_time = self.interval_s

    def reset(self) -> None:
        self._next_time = self.interval_s


def next_push(schedule: PushSchedule, t: float, rng: np.random.Generator) -> np.ndarray | None:
    """Planar velocity impulse when `t` crosses the next 3 s boundary, else None."""
    if t < 0.0:
        raise ValueError("t must be non-negative")
    if t < schedule._next_time:
        return None
    schedule._next_time += schedule.interval_s
    mag = rng.uniform(0.0, schedule.max_magnitude_ms)
    ang = rng.uniform(0.0, 2.0 * math.pi)
    return np.array([mag * math.cos(ang), mag * math.sin(ang)])
