"""Training-command generation for both curriculum stages.

Stage 1 samples end-effector waypoints in spherical coordinates around the
arm base.  Stage 2 draws Cartesian trajectories from demonstration data,
expressed relative to their initial pose, and maps workspace exceedance of
future targets to bounded base-velocity commands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .demos import Demo, DemoDataset
from .kinematics import ArmModel, Pose, quat_conj, quat_mul

WORKSPACE_SHRINK = 0.7
BASE_CMD_MIN = 0.3      # m/s
BASE_CMD_MAX = 0.8      # m/s
DEFAULT_EXCEEDANCE_GAIN = 0.5   # (m/s) per metre of mean exceedance


@dataclass
class Workspace:
    """Spherical shell around the arm base with a shrunken command boundary."""

    r_min: float
    r_max: float

    def __post_init__(self):
        if not 0.0 <= self.r_min < self.r_max:
            raise ValueError("need 0 <= r_min < r_max")

    @classmethod
    def from_arm(cls, arm: ArmModel) -> "Workspace":
        return cls(0.1, arm.reach)

    @property
    def d_thresh(self) -> float:
        return WORKSPACE_SHRINK * self.r_max

    def contains(self, point: np.ndarray) -> bool:
        r = float(np.linalg.norm(np.asarray(point)))
        return self.r_min <= r <= self.r_max

    def within_thresh(self, point: np.ndarray) -> bool:
        return float(np.linalg.norm(np.asarray(point))) <= self.d_thresh


@dataclass
class WaypointSequence:
    poses: list[Pose]
    hold_durations_s: list[float]

    def __post_init__(self):
        if not self.poses:
            raise ValueError("waypoint sequence cannot be empty")
        if len(self.poses) != len(self.hold_durations_s):
            raise ValueError("poses and durations must align")
        if any(d <= 0.0 for d in self.hold_durations_s):
            raise ValueError("hold durations must be positive")


@dataclass
class BaseVelocityCommand:
    vx: float = 0.0
    vy: float = 0.0

    @property
    def magnitude(self) -> float:
        return math.hypot(self.vx, self.vy)

    def __post_init__(self):
        m = self.magnitude
        if m > 1e-12 and not (BASE_CMD_MIN - 1e-9 <= m <= BASE_CMD_MAX + 1e-9):
            raise ValueError("non-zero base command magnitude must lie in [0.3, 0.8] m/s")


def _spherical_to_cartesian(r: float, azimuth: float, elevation: float) -> np.ndarray:
    ce = math.cos(elevation)
    return np.array([r * ce * math.cos(azimuth), r * ce * math.sin(azimuth), r * math.sin(elevation)])


def sample_spherical_waypoints(
    rng: np.random.Generator,
    n: int,
    radial_range: tuple[float, float],
    azimuth_range: tuple[float, float] = (-math.pi / 3, math.pi / 3),
    elevation_range: tuple[float, float] = (-math.pi / 6, math.pi / 4),
    hold_range_s: tuple[float, float] = (0.5, 1.5),
    workspace: Workspace | None = None,
) -> WaypointSequence:
    """n waypoints uniform in the spherical-coordinate box, arm-base frame."""
    if n <= 0:
        raise ValueError("need at least one waypoint")
    for lo, hi in (radial_range, azimuth_range, elevation_range):
        if lo > hi:
            raise ValueError("empty sampling range")
    if workspace is not None and (radial_range[0] < workspace.r_min or radial_range[1] > workspace.r_max):
        raise ValueError("radial range outside workspace shell")
    poses, holds = [], []
    for _ in range(n):
        r = rng.uniform(*radial_range)
        az = rng.uniform(*azimuth_range)
        el = rng.uniform(*elevation_range)
        p = _spherical_to_cartesian(r, az, el)
        # tool roughly points outward along the bearing
        half = 0.5 * az
        quat = np.array([math.cos(half), 0.0, 0.0, math.sin(half)])
        poses.append(Pose(p, quat))
        holds.append(float(rng.uniform(*hold_range_s)))
    return WaypointSequence(poses, holds)


def resample_demo(demo: Demo, tick_rate_hz: float) -> np.ndarray:
    """Linear-interpolate a demo's records onto a uniform tick grid.

    Returns (n, 12): pose 7 + width + tactile 4, with the pose expressed as
    relative displacement from the first sample (position differenced,
    orientation left-multiplied by the inverse initial quaternion).
    """
    t = demo.t
    duration = demo.duration
    n = max(2, int(round(duration * tick_rate_hz)) + 1)
    grid = np.linspace(t[0], t[-1], n)
    cols = [np.interp(grid, t, demo.records[:, j]) for j in range(1, 13)]
    out = np.stack(cols, axis=1)
    # relative convention
    p0 = out[0, 0:3].copy()
    q0 = out[0, 3:7].copy()
    q0 /= np.linalg.norm(q0)
    out[:, 0:3] -= p0
    q0_inv = quat_conj(q0)
    for i in range(n):
        q = out[i, 3:7]
        q = quat_mul(q0_inv, q / np.linalg.norm(q))
        out[i, 3:7] = q if q[0] >= 0 else -q
    return out


def sample_demo_trajectory(dataset: DemoDataset, rng: np.random.Generator) -> np.ndarray:
    """Pick one demo and resample it to the dataset tick rate (relative poses)."""
    if len(dataset) == 0:
        raise ValueError("demo dataset is empty")
    idx = int(rng.integers(0, len(dataset)))
    return resample_demo(dataset.demos[idx], dataset.tick_rate_hz)


def reachability_command(
    future_targets: np.ndarray,
    ws: Workspace,
    gain: float = DEFAULT_EXCEEDANCE_GAIN,
) -> BaseVelocityCommand:
    """Map accumulated horizontal workspace exceedance to a base velocity.

    ``future_targets``: (n, >=3) upcoming EE positions in the arm-base frame.
    Targets inside d_thresh contribute nothing; the mean exceedance vector
    (beyond d_thresh, measured radially in the horizontal plane) is scaled
    by ``gain`` and, when non-zero, clamped into [0.3, 0.8] m/s.
    """
    targets = np.atleast_2d(np.asarray(future_targets, dtype=np.float64))
    if targets.shape[0] == 0:
        raise ValueError("need at least one future target")
    acc = np.zeros(2)
    for p in targets:
        d = math.hypot(p[0], p[1])
        exceed = d - ws.d_thresh
        if exceed > 0.0 and d > 1e-12:
            acc += exceed * np.array([p[0] / d, p[1] / d])
    acc /= targets.shape[0]
    mag = gain * float(np.linalg.norm(acc))
    if mag <= 0.0:
        return BaseVelocityCommand(0.0, 0.0)
    direction = acc / np.linalg.norm(acc)
    mag = float(np.clip(mag, BASE_CMD_MIN, BASE_CMD_MAX))
    return BaseVelocityCommand(mag * direction[0], mag * direction[1])
