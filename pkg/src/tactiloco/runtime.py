"""Multi-rate episode runtime.

The world ticks at 200 Hz.  The low-level policy refreshes leg targets every
4 ticks (50 Hz) and arm targets every 20 ticks (10 Hz); the high-level
command source is polled every 100 ticks (2 Hz).  Between refreshes the last
emission is latched.  Episodes are logged tick-by-tick to a CSV whose bytes
are reproducible for a fixed seed and config hash.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import gait as gait_mod
from .commands import Workspace, reachability_command
from .kinematics import ArmModel, forward_kinematics, quat_mul
from .lowlevel import (
    ARM_ACTION_SCALE,
    LEG_ACTION_SCALE,
    STAGE1_OBS_DIM,
    STAGE2_OBS_DIM,
    TrackingIk,
    build_observation,
    policy_act,
    snapshot_obs_fields,
)
from .randomize import PushSchedule, RandomizationRanges, draw_episode, next_push
from .rewards import CommandBundle, RewardWeights, total_reward
from .simworld import (
    DEFAULT_Q_STAND,
    GRIPPER_MAX_WIDTH,
    GraspObject,
    SurrogateWorld,
    TICK_DT,
    WorldFault,
)


@dataclass(frozen=True)
class RateSchedule:
    base_hz: float = 200.0
    leg_divisor: int = 4
    arm_divisor: int = 20
    high_level_divisor: int = 100

    def __post_init__(self):
        for name in ("leg_divisor", "arm_divisor", "high_level_divisor"):
            v = getattr(self, name)
            if not (isinstance(v, int) and v >= 1):
                raise ValueError(f"{name} must be a positive integer")
        if self.base_hz <= 0:
            raise ValueError("base_hz must be positive")

    @property
    def leg_hz(self) -> float:
        return self.base_hz / self.leg_divisor

    @property
    def arm_hz(self) -> float:
        return self.base_hz / self.arm_divisor

    @property
    def high_level_hz(self) -> float:
        return self.base_hz / self.high_level_divisor

    def due(self, tick: int, divisor: int) -> bool:
        return tick % divisor == 0


# --------------------------------------------------------------------------
# high-level command sources

class TrajectorySource:
    """Plays back a precomputed (n, 12) command sequence at the high-level rate.

    Row layout: relative EE position (3), relative quaternion (4), gripper
    width (1), tactile command (4).  Rows past the end latch the final row.
    """

    def __init__(self, rows: np.ndarray):
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] != 12 or rows.shape[0] == 0:
            raise ValueError("trajectory must be a non-empty (n, 12) array")
        self.rows = rows
        self._k = 0

    def next_row(self, obs_history: np.ndarray | None = None) -> np.ndarray:
        row = self.rows[min(self._k, self.rows.shape[0] - 1)]
        self._k += 1
        return row

    @property
    def exhausted(self) -> bool:
        return self._k >= self.rows.shape[0]


class DiffusionSource:
    """Samples action chunks from a trained denoiser, receding-horizon style.

    Replans every ``execute_k`` high-level steps; consumes one row per step.
    """

    def __init__(self, bundle, observe, execute_k: int = 8, ddim_steps: int = 16,
                 seed: int = 0, max_steps: int | None = None):
        from .diffusion import ddim_sample
        self._sample = ddim_sample
        self.bundle = bundle
        self.observe = observe
        self.execute_k = execute_k
        self.ddim_steps = ddim_steps
        self.seed = seed
        self.max_steps = max_steps
        self._chunk = None
        self._k = 0
        self._emitted = 0
        self.replans = 0

    def next_row(self, obs_history: np.ndarray | None = None) -> np.ndarray:
        if self._chunk is None or self._k >= self.execute_k:
            hist = obs_history if obs_history is not None else self.observe()
            self._chunk = self._sample(self.bundle, hist, n_steps=self.ddim_steps,
                                       seed=self.seed + self.replans)
            self._k = 0
            self.replans += 1
        row = self._chunk[self._k]
        self._k += 1
        self._emitted += 1
        return row

    @property
    def exhausted(self) -> bool:
        return self.max_steps is not None and self._emitted >= self.max_steps


# --------------------------------------------------------------------------
# rollout logging

LOG_COLUMNS = (
    "tick", "t",
    "vx_cmd", "vy_cmd", "wz_cmd",
    "vx", "vy", "wz",
    "ee_cmd_x", "ee_cmd_y", "ee_cmd_z",
    "ee_x", "ee_y", "ee_z",
    "s_cmd_0", "s_cmd_1", "s_cmd_2", "s_cmd_3",
    "s_0", "s_1", "s_2", "s_3",
    "gripper_width", "fine", "reward",
)


@dataclass
class RolloutLog:
    seed: int
    config_hash: str
    draw: dict
    records: list[np.ndarray] = field(default_factory=list)
    aborted: bool = False
    abort_reason: str = ""

    def add(self, row: np.ndarray):
        if row.shape != (len(LOG_COLUMNS),):
            raise ValueError(f"log row must have {len(LOG_COLUMNS)} fields")
        self.records.append(np.asarray(row, dtype=np.float64))

    def as_array(self) -> np.ndarray:
        if not self.records:
            return np.zeros((0, len(LOG_COLUMNS)))
        return np.stack(self.records)

    def column(self, name: str) -> np.ndarray:
        return self.as_array()[:, LOG_COLUMNS.index(name)]

    def to_csv(self, path):
        with open(path, "w") as f:
            f.write(f"# seed={self.seed}\n")
            f.write(f"# config_hash={self.config_hash}\n")
            for k in sorted(self.draw):
                f.write(f"# draw.{k}={self.draw[k]!r}\n")
            f.write(f"# aborted={self.aborted}\n")
            if self.aborted:
                f.write(f"# abort_reason={self.abort_reason}\n")
            f.write(",".join(LOG_COLUMNS) + "\n")
            for row in self.records:
                f.write(",".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def from_csv(cls, path) -> "RolloutLog":
        seed, config_hash, draw = 0, "", {}
        aborted, reason = False, ""
        records = []
        with open(path) as f:
            for line in f:
                line = line.rstrip("\n")
                if line.startswith("# "):
                    key, _, val = line[2:].partition("=")
                    if key == "seed":
                        seed = int(val)
                    elif key == "config_hash":
                        config_hash = val
                    elif key == "aborted":
                        aborted = val == "True"
                    elif key == "abort_reason":
                        reason = val
                    elif key.startswith("draw."):
                        draw[key[5:]] = eval(val)  # noqa: S307 - our own repr output
                elif line and not line.startswith("tick,"):
                    records.append(np.array([float(v) for v in line.split(",")]))
        log = cls(seed=seed, config_hash=config_hash, draw=draw, records=records)
        log.aborted = aborted
        log.abort_reason = reason
        return log


# --------------------------------------------------------------------------
# episode execution

def run_episode(
    params: dict,
    source,
    seed: int = 0,
    duration_s: float = 8.0,
    config_hash: str = "",
    rates: RateSchedule | None = None,
    grasp_object: GraspObject | None = None,
    ranges: RandomizationRanges | None = None,
    weights: RewardWeights | None = None,
    pushes: bool = False,
) -> RolloutLog:
    """Run one closed-loop episode and return its tick log.

    ``source`` provides high-level command rows (see TrajectorySource); the
    policy in ``params`` tracks them.  A world fault aborts the episode; the
    log records everything up to the fault and is marked aborted.
    """
    rates = rates or RateSchedule()
    weights = weights or RewardWeights()
    arm = ArmModel()
    g = gait_mod.GaitCommand()
    draw = draw_episode(ranges or RandomizationRanges(), seed)
    world = SurrogateWorld(arm=arm, draw=draw, gait_cmd=g, grasp_object=grasp_object)
    ws = Workspace.from_arm(arm)
    ik = TrackingIk(arm)

    obs_dim = int(params["__obs_dim__"][0])
    if obs_dim not in (STAGE1_OBS_DIM, STAGE2_OBS_DIM):
        raise ValueError(f"unsupported policy observation dim {obs_dim}")
    stage = 1 if obs_dim == STAGE1_OBS_DIM else 2

    anchor = forward_kinematics(arm, arm.default_q(), check_limits=False)
    cmd = CommandBundle(ee_pos_cmd=anchor.pos, ee_quat_cmd=anchor.quat,
                        fine_manipulation=True)
    world.set_command(cmd)

    log = RolloutLog(seed=seed, config_hash=config_hash, draw=draw.as_dict())
    push_schedule = PushSchedule()
    push_rng = np.random.default_rng(seed + 17)

    n_ticks = int(round(duration_s / TICK_DT))
    leg_targets = DEFAULT_Q_STAND.copy()
    arm_targets = arm.default_q()
    snap = world.step(leg_targets, arm_targets, GRIPPER_MAX_WIDTH)

    try:
        for tick in range(n_ticks):
            if rates.due(tick, rates.high_level_divisor):
                row = source.next_row()
                cmd.ee_pos_cmd = anchor.pos + row[0:3]
                q_rel = row[3:7] / max(float(np.linalg.norm(row[3:7])), 1e-12)
                cmd.ee_quat_cmd = quat_mul(anchor.quat, q_rel)
                cmd.gripper_width_cmd = float(np.clip(row[7], 0.0, GRIPPER_MAX_WIDTH))
                cmd.tactile_cmd = np.clip(row[8:12], 0.0, 1.0)
                base_cmd = reachability_command(cmd.ee_pos_cmd[None, :], ws)
                cmd.vx, cmd.vy = base_cmd.vx, base_cmd.vy
                cmd.fine_manipulation = base_cmd.magnitude < 1e-9
                world.set_command(cmd)
            if rates.due(tick, rates.leg_divisor) or rates.due(tick, rates.arm_divisor):
                obs = build_observation(snapshot_obs_fields(snap), cmd, g,
                                        world.state.time, stage)
                action = policy_act(params, obs, deterministic=True)
                if rates.due(tick, rates.leg_divisor):
                    leg_targets = DEFAULT_Q_STAND + LEG_ACTION_SCALE * action[:12]
                if rates.due(tick, rates.arm_divisor):
                    q_ik = ik.track(cmd.ee_pos_cmd, cmd.ee_quat_cmd, iters=3)
                    arm_targets = q_ik + ARM_ACTION_SCALE * action[12:]
            if pushes:
                push = next_push(push_schedule, world.state.time, push_rng)
                if push is not None:
                    world.apply_push(push)
            snap = world.step(leg_targets, arm_targets, cmd.gripper_width_cmd)
            breakdown = total_reward(snap, cmd, g, world.state.time, weights)
            log.add(np.array([
                tick, world.state.time,
                cmd.vx, cmd.vy, cmd.wz,
                snap.v_base[0], snap.v_base[1], snap.omega_base[2],
                *cmd.ee_pos_cmd, *snap.ee_pos,
                *cmd.tactile_cmd, *snap.tactile,
                world.state.gripper_width,
                1.0 if cmd.fine_manipulation else 0.0,
                breakdown.total,
            ]))
            if getattr(source, "exhausted", False) and tick >= rates.high_level_divisor:
                break
    except WorldFault as exc:
        log.aborted = True
        log.abort_reason = str(exc)
    return log


# --------------------------------------------------------------------------
# plot-data export

def export_tracking_plot_data(log: RolloutLog) -> dict[str, np.ndarray]:
    """Min–max normalized [0, 1] series for plotting, plus travelled distance.

    Constant series map to 0.5.  ``distance`` is the time integral of planar
    base speed (not normalized).
    """
    arr = log.as_array()
    out: dict[str, np.ndarray] = {}
    for name in LOG_COLUMNS:
        if name == "tick":
            continue
        col = arr[:, LOG_COLUMNS.index(name)] if arr.size else np.zeros(0)
        if col.size == 0:
            out[name] = col
            continue
        lo, hi = float(col.min()), float(col.max())
        if hi - lo < 1e-12:
            out[name] = np.full_like(col, 0.5)
        else:
            out[name] = (col - lo) / (hi - lo)
    if arr.size:
        speed = np.hypot(arr[:, LOG_COLUMNS.index("vx")], arr[:, LOG_COLUMNS.index("vy")])
        out["distance"] = np.cumsum(speed) * TICK_DT
    else:
        out["distance"] = np.zeros(0)
    return out
