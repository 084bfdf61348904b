"""Reward suite for the low-level policy: command-following, gait/contact,
regularization, balance, and tactile/position tracking terms.

Every term is evaluated from a `RobotSnapshot` + `CommandBundle` pair and
reported both raw and weighted; the scalar training reward is the weighted
sum.  Balance terms are gated on the fine-manipulation flag (they only
apply once the arm is doing fine manipulation with zero planar base
command).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields as dc_fields

import numpy as np

from .gait import GaitCommand, desired_contact


@dataclass
class RobotSnapshot:
    """Everything the reward terms read from one simulation step."""

    q_leg: np.ndarray               # (12,) rad
    qd_leg: np.ndarray              # (12,) rad/s
    q_arm: np.ndarray               # (6,) rad
    qd_arm: np.ndarray              # (6,) rad/s
    q_default: np.ndarray           # (12,) rad, nominal standing leg posture
    q_hung_leg: np.ndarray          # (12,) rad, fine-manipulation leg posture
    tau: np.ndarray                 # (18,) N*m
    v_base: np.ndarray              # (3,) m/s
    omega_base: np.ndarray          # (3,) rad/s
    f_foot: np.ndarray              # (4, 3) N
    v_foot: np.ndarray              # (4, 3) m/s
    h_foot: np.ndarray              # (4,) m
    t_air: np.ndarray               # (4,) s
    first_contact: np.ndarray       # (4,) {0,1}
    contact: np.ndarray             # (4,) {0,1}
    prev_action: np.ndarray         # (18,)
    curr_action: np.ndarray         # (18,)
    prev_qd_leg: np.ndarray         # (12,) rad/s
    prev_qd_arm: np.ndarray         # (6,) rad/s
    prev_f_foot: np.ndarray         # (4, 3) N
    prev_v_base: np.ndarray         # (3,) m/s
    prev_omega_base: np.ndarray     # (3,) rad/s
    dt: float                       # s
    ee_pos: np.ndarray              # (3,) m, arm-base frame
    tactile: np.ndarray             # (4,) normalized descriptor

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        shapes = {
            "q_leg": (12,), "qd_leg": (12,), "q_arm": (6,), "qd_arm": (6,),
            "q_default": (12,), "q_hung_leg": (12,), "tau": (18,),
            "v_base": (3,), "omega_base": (3,), "f_foot": (4, 3),
            "v_foot": (4, 3), "h_foot": (4,), "t_air": (4,),
            "first_contact": (4,), "contact": (4,), "prev_action": (18,),
            "curr_action": (18,), "prev_qd_leg": (12,), "prev_qd_arm": (6,),
            "prev_f_foot": (4, 3), "prev_v_base": (3,), "prev_omega_base": (3,),
            "ee_pos": (3,), "tactile": (4,),
        }
        for name, shape in shapes.items():
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
            setattr(self, name, arr)
        if np.any(self.t_air < 0.0):
            raise ValueError("air time cannot be negative")

    @classmethod
    def rest(cls, dt: float = 0.005) -> "RobotSnapshot":
        """All-zero snapshot in the hung-up posture (handy baseline for tests)."""
        z = np.zeros
        return cls(
            q_leg=z(12), qd_leg=z(12), q_arm=z(6), qd_arm=z(6),
            q_default=z(12), q_hung_leg=z(12), tau=z(18),
            v_base=z(3), omega_base=z(3), f_foot=z((4, 3)), v_foot=z((4, 3)),
            h_foot=z(4), t_air=z(4), first_contact=z(4), contact=z(4),
            prev_action=z(18), curr_action=z(18), prev_qd_leg=z(12),
            prev_qd_arm=z(6), prev_f_foot=z((4, 3)), prev_v_base=z(3),
            prev_omega_base=z(3), dt=dt, ee_pos=z(3), tactile=z(4),
        )


@dataclass
class CommandBundle:
    """Command inputs to the low-level policy for one step."""

    vx: float = 0.0                 # m/s, base frame
    vy: float = 0.0                 # m/s
    wz: float = 0.0                 # rad/s
    ee_pos_cmd: np.ndarray = field(default_factory=lambda: np.zeros(3))      # m, arm-base frame
    ee_quat_cmd: np.ndarray = field(default_factory=lambda: np.array([1.0, 0, 0, 0]))  # w,x,y,z
    gripper_width_cmd: float = 0.085        # m
    tactile_cmd: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.5, 0.5, 0.5]))
    fine_manipulation: bool = False

    def __post_init__(self):
        self.ee_pos_cmd = np.asarray(self.ee_pos_cmd, dtype=np.float64)
        self.ee_quat_cmd = np.asarray(self.ee_quat_cmd, dtype=np.float64)
        self.tactile_cmd = np.asarray(self.tactile_cmd, dtype=np.float64)
        n = np.linalg.norm(self.ee_quat_cmd)
        if abs(n - 1.0) > 1e-6:
            raise ValueError("EE orientation command must be a unit quaternion")


@dataclass
class RewardWeights:
    """Per-term weights and kernel widths.  Defaults are the tuned values
    the rest of the pipeline was built against; change them via config."""

    # command following
    lin_vel_x: float = 2.0
    yaw_vel: float = 0.5
    lin_vel_y: float = 0.0          # optional symmetric lateral term, off by default
    # gait & contact
    feet_air_time: float = 2.0
    feet_height: float = 1.0
    swing_phase_force: float = -2.0
    stance_phase_velocity: float = -2.0
    # regularization
    joint_torques: float = -2.5e-5
    joint_acceleration: float = -7.5e-7
    action_rate: float = -0.015
    feet_jerk: float = -2.0e-4
    feet_drag: float = -0.08
    # balance (fine manipulation only)
    base_stable: float = 0.02
    leg_posture: float = 0.005
    smooth: float = 0.1
    # tracking (stage 2)
    tactile_track: float = 0.1
    position_track: float = 0.06
    # kernel widths / targets
    sigma_vel: float = 0.25
    sigma_cf: float = 25.0          # N^2
    sigma_cv: float = 0.25          # (m/s)^2
    # tac: squared norm of a normalized 4-vector difference (typical
    # mismatches 0.05-0.5); pos: squared metres -- 0.002 m^2 puts the kernel
    # knee near 4-5 cm, the scale at which tabletop grasps succeed or fail
    sigma_tac: float = 0.1
    sigma_pos: float = 0.002        # m^2
    foot_height_target: float = 0.1  # m
    air_time_offset: float = 0.5     # s


@dataclass
class RewardBreakdown:
    """Per-term (raw, weighted) map plus the weighted total."""

    terms: dict[str, tuple[float, float]] = field(default_factory=dict)

    def add(self, name: str, raw: float, weight: float) -> None:
        self.terms[name] = (raw, raw * weight)

    def merge(self, other: "RewardBreakdown") -> "RewardBreakdown":
        self.terms.update(other.terms)
        return self

    @property
    def total(self) -> float:
        return float(sum(w for _, w in self.terms.values()))

    def raw(self, name: str) -> float:
        return self.terms[name][0]

    def weighted(self, name: str) -> float:
        return self.terms[name][1]


def tracking_kernel(err: float, sigma: float) -> float:
    """exp(-err^2 / sigma): 1 at zero error, decays with |err|."""
    if sigma <= 0.0:
        raise ValueError("kernel width must be positive")
    return math.exp(-(err * err) / sigma)


def command_rewards(snap: RobotSnapshot, cmd: CommandBundle, w: RewardWeights) -> RewardBreakdown:
    b = RewardBreakdown()
    b.add("lin_vel_x", tracking_kernel(cmd.vx - snap.v_base[0], w.sigma_vel), w.lin_vel_x)
    b.add("yaw_vel", tracking_kernel(cmd.wz - snap.omega_base[2], w.sigma_vel), w.yaw_vel)
    if w.lin_vel_y != 0.0:
        b.add("lin_vel_y", tracking_kernel(cmd.vy - snap.v_base[1], w.sigma_vel), w.lin_vel_y)
    return b


def gait_contact_rewards(snap: RobotSnapshot, g: GaitCommand, t: float, w: RewardWeights) -> RewardBreakdown:
    c_cmd = desired_contact(g, t)
    b = RewardBreakdown()

    air = float(np.sum((snap.t_air - w.air_time_offset) * snap.first_contact))
    b.add("feet_air_time", air, w.feet_air_time)

    # per-foot swing height above target, swing feet only
    swing = 1.0 - c_cmd
    height = float(np.sum(swing * np.maximum(snap.h_foot - w.foot_height_target, 0.0)))
    b.add("feet_height", height, w.feet_height)

    f2 = np.sum(snap.f_foot ** 2, axis=1)
    swing_force = float(np.sum(swing * (1.0 - np.exp(-f2 / w.sigma_cf))))
    b.add("swing_phase_force", swing_force, w.swing_phase_force)

    v2 = np.sum(snap.v_foot ** 2, axis=1)
    stance_vel = float(np.sum(c_cmd * (1.0 - np.exp(-v2 / w.sigma_cv))))
    b.add("stance_phase_velocity", stance_vel, w.stance_phase_velocity)
    return b


def regularization_rewards(snap: RobotSnapshot, w: RewardWeights) -> RewardBreakdown:
    b = RewardBreakdown()
    b.add("joint_torques", float(snap.tau @ snap.tau), w.joint_torques)

    qd = np.concatenate([snap.qd_leg, snap.qd_arm])
    qd_prev = np.concatenate([snap.prev_qd_leg, snap.prev_qd_arm])
    acc = (qd - qd_prev) / snap.dt
    b.add("joint_acceleration", float(acc @ acc), w.joint_acceleration)

    da = (snap.curr_action - snap.prev_action)[:12]   # leg components only
    b.add("action_rate", float(da @ da), w.action_rate)

    jerk = float(np.sum(np.linalg.norm(snap.f_foot - snap.prev_f_foot, axis=1)))
    b.add("feet_jerk", jerk, w.feet_jerk)

    drag = float(np.sum(snap.contact * np.sum(np.abs(snap.v_foot), axis=1)))
    b.add("feet_drag", drag, w.feet_drag)
    return b


def balance_rewards(snap: RobotSnapshot, w: RewardWeights) -> RewardBreakdown:
    b = RewardBreakdown()
    vxy = snap.v_base[:2]
    base_stable = -(0.2 * float(vxy @ vxy) + 0.5 * float(snap.omega_base @ snap.omega_base))
    b.add("base_stable", base_stable, w.base_stable)

    dq = snap.q_leg - snap.q_hung_leg
    dq_step = snap.qd_leg * snap.dt
    b.add("leg_posture", -(float(dq @ dq) + 0.1 * float(dq_step @ dq_step)), w.leg_posture)

    dv = (snap.v_base - snap.prev_v_base)[:2]
    dw = snap.omega_base - snap.prev_omega_base
    b.add("smooth", -(float(dv @ dv) + float(dw @ dw)), w.smooth)
    return b


def track_rewards(snap: RobotSnapshot, cmd: CommandBundle, w: RewardWeights) -> RewardBreakdown:
    b = RewardBreakdown()
    ds = cmd.tactile_cmd - snap.tactile
    b.add("tactile_track", math.exp(-float(ds @ ds) / w.sigma_tac), w.tactile_track)
    dp = cmd.ee_pos_cmd - snap.ee_pos
    b.add("position_track", math.exp(-float(dp @ dp) / w.sigma_pos), w.position_track)
    return b


def total_reward(
    snap: RobotSnapshot,
    cmd: CommandBundle,
    g: GaitCommand,
    t: float,
    w: RewardWeights,
) -> RewardBreakdown:
    """All terms; balance terms only when the fine-manipulation flag is set."""
    b = command_rewards(snap, cmd, w)
    b.merge(gait_contact_rewards(snap, g, t, w))
    b.merge(regularization_rewards(snap, w))
    if cmd.fine_manipulation:
        b.merge(balance_rewards(snap, w))
    b.merge(track_rewards(snap, cmd, w))
    return b


def breakdown_csv_header(b: RewardBreakdown) -> str:
    return ",".join(list(b.terms.keys()) + ["total"])


def breakdown_csv_row(b: RewardBreakdown) -> str:
    return ",".join([repr(wv) for _, wv in b.terms.values()] + [repr(b.total)])
