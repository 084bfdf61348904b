"""Reduced-order surrogate world: quadruped base + 6-DoF arm + gripper.

This is deliberately NOT a rigid-body simulator.  It provides just enough
structure to exercise every reward term and both training stages:

* first-order joint tracking with motor-strength scaling,
* base planar velocity that converges to the commanded velocity scaled by
  a "gait competence" factor (how well the leg targets match a reference
  trot pattern), so locomotion quality genuinely depends on the policy,
* schedule-driven feet with spring-damper stance forces and air-time
  bookkeeping,
* a forward tactile model on grasp: the contact patch shifts and rotates
  with end-effector tracking error, and squeezing past an object's
  fragility threshold sets a damage flag,
* base wobble during fine manipulation proportional to how far the legs
  are from the hung-up posture, so balance behaviour affects manipulation.

Determinism: stepping contains no internal randomness; all variation comes
from the episode draw and externally applied pushes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import tactile
from .gait import GaitCommand, desired_contact, foot_phases
from .kinematics import ArmModel, Pose, forward_kinematics, rot_log, quat_to_rot
from .randomize import EpisodeDraw
from .rewards import CommandBundle, RobotSnapshot

TICK_DT = 1.0 / 200.0

BASE_MASS_KG = 15.0
GRAVITY = 9.81
NOMINAL_BASE_HEIGHT = 0.32
ARM_MOUNT_OFFSET = np.array([0.15, 0.0, 0.08])   # on the base body
GRIPPER_MAX_WIDTH = 0.085                        # m
GRIPPER_SPEED = 0.15                             # m/s
GRIP_FORCE_FULL_N = 20.0                         # squeeze force at full normalized grip

# leg tracking / locomotion model
JOINT_LAG_S = 0.05
BASE_VEL_TAU_S = 0.05
GAIT_COMPETENCE_SPAN = 0.9       # rad^2 of leg-pattern mismatch at which drive is lost
GAIT_REF_AMPLITUDE = 0.7         # rad at 1 m/s commanded speed (capped)
LEG_KP = 25.0                    # N*m/rad torque estimate
ARM_KP = 10.0
FOOT_STIFFNESS = 2000.0          # N/m
FOOT_DAMPING = 50.0              # N*s/m
SWING_HEIGHT = 0.09              # m

# tactile coupling
PATCH_SHIFT_MM_PER_M = 600.0     # contact-center shift per metre of EE error
PATCH_THETA_GAIN = 2.0           # patch rotation per rad of tool-axis error
MISALIGN_FORCE_GAIN = 3.0        # effective squeeze amplification when off-center

# fine-manipulation wobble
WOBBLE_GAIN = 0.06               # m of arm-base sway per rad^2 of leg-posture error
WOBBLE_CAP = 0.12                # m
WOBBLE_HZ = (3.0, 2.3, 3.7)

DEFAULT_Q_STAND = np.array([0.0, 0.8, -1.5] * 4)
DEFAULT_Q_HUNG = np.array([0.0, 1.1, -2.1] * 4)


class WorldFault(RuntimeError):
    """Hard fault (NaN input or invalid state); the episode must abort."""


@dataclass
class GraspObject:
    width_mm: float
    fragility_n: float
    present: bool = True


@dataclass
class LeanPosture:
    pitch_rad: float = 0.0
    height_offset_m: float = 0.0

    def __post_init__(self):
        if abs(self.pitch_rad) > 0.5:
            raise ValueError("lean pitch must stay within +-0.5 rad")
        if not -0.15 <= self.height_offset_m <= 0.0:
            raise ValueError("lean height offset must lie in [-0.15, 0]")


@dataclass
class WorldState:
    pos: np.ndarray                      # (3,) world: x, y, base height
    rpy: np.ndarray                      # (3,) roll, pitch, yaw
    v_base: np.ndarray                   # (3,) base frame, m/s
    omega_base: np.ndarray               # (3,) rad/s
    q_leg: np.ndarray                    # (12,)
    qd_leg: np.ndarray                   # (12,)
    q_arm: np.ndarray                    # (6,)
    qd_arm: np.ndarray                   # (6,)
    gripper_width: float                 # m
    grasp_object: GraspObject | None
    h_foot: np.ndarray                   # (4,)
    f_foot: np.ndarray                   # (4, 3)
    v_foot: np.ndarray                   # (4, 3)
    t_air: np.ndarray                    # (4,)
    contact: np.ndarray                  # (4,) {0, 1}
    time: float = 0.0
    damage: bool = False

    def copy(self) -> "WorldState":
        c = replace(self)
        for name in ("pos", "rpy", "v_base", "omega_base", "q_leg", "qd_leg",
                     "q_arm", "qd_arm", "h_foot", "f_foot", "v_foot", "t_air", "contact"):
            setattr(c, name, getattr(self, name).copy())
        return c


def initial_state(
    arm: ArmModel,
    draw: EpisodeDraw | None = None,
    grasp_object: GraspObject | None = None,
) -> WorldState:
    q_leg = DEFAULT_Q_STAND.copy()
    pos = np.array([0.0, 0.0, NOMINAL_BASE_HEIGHT])
    rpy = np.zeros(3)
    v = np.zeros(3)
    if draw is not None:
        q_leg = q_leg * draw.init_joint_scale
        pos[:2] += draw.init_pos_perturb_m
        rpy[2] = draw.init_yaw_rad
        v[:2] = draw.init_vel_perturb_ms
    return WorldState(
        pos=pos, rpy=rpy, v_base=v, omega_base=np.zeros(3),
        q_leg=q_leg, qd_leg=np.zeros(12),
        q_arm=arm.default_q(), qd_arm=np.zeros(6),
        gripper_width=GRIPPER_MAX_WIDTH, grasp_object=grasp_object,
        h_foot=np.zeros(4), f_foot=np.zeros((4, 3)), v_foot=np.zeros((4, 3)),
        t_air=np.zeros(4), contact=np.ones(4), time=0.0,
    )


def leg_reference_offsets(g: GaitCommand, t: float, vx: float, vy: float, wz: float) -> np.ndarray:
    """Reference leg-joint offsets (around stand) realizing the commanded gait.

    Amplitude scales with commanded planar speed; a standing command gives
    the zero offset (hold the default posture).
    """
    speed = math.sqrt(vx * vx + vy * vy) + 0.3 * abs(wz)
    amp = GAIT_REF_AMPLITUDE * min(speed, 1.0)
    phi = foot_phases(g, t)
    ref = np.zeros(12)
    s = np.sin(2.0 * math.pi * phi)
    c = np.cos(2.0 * math.pi * phi)
    for i in range(4):
        # hip swings with phase; thigh/calf flex against each other
        ref[3 * i + 0] = 0.25 * amp * s[i] * math.copysign(1.0, vy) if abs(vy) > abs(vx) else 0.0
        ref[3 * i + 1] = amp * s[i]
        ref[3 * i + 2] = -0.6 * amp * c[i]
    return ref


class SurrogateWorld:
    """Single-owner environment: one instance per rollout worker."""

    def __init__(
        self,
        arm: ArmModel | None = None,
        draw: EpisodeDraw | None = None,
        gait_cmd: GaitCommand | None = None,
        grasp_object: GraspObject | None = None,
        q_hung: np.ndarray | None = None,
    ):
        self.arm = arm if arm is not None else ArmModel()
        self.draw = draw
        self.gait = gait_cmd if gait_cmd is not None else GaitCommand()
        self.cmd = CommandBundle()
        self.q_hung = DEFAULT_Q_HUNG.copy() if q_hung is None else np.asarray(q_hung, float)
        self.lean = LeanPosture()
        self.state = initial_state(self.arm, draw, grasp_object)
        self._prev_targets = np.concatenate([self.state.q_leg, self.state.q_arm])
        self._prev_qd_leg = np.zeros(12)
        self._prev_qd_arm = np.zeros(6)
        self._prev_f_foot = np.zeros((4, 3))
        self._prev_v_base = np.zeros(3)
        self._prev_omega = np.zeros(3)
        self._prev_contact = np.ones(4)

    # -- external perturbations / posture ---------------------------------

    def apply_push(self, impulse_xy: np.ndarray) -> None:
        """Instantaneous planar base-velocity increment (push proxy)."""
        self.state.v_base[:2] += impulse_xy

    def set_command(self, cmd: CommandBundle) -> None:
        self.cmd = cmd

    def total_mass(self) -> float:
        m = BASE_MASS_KG
        if self.draw is not None:
            m += self.draw.base_mass_offset_kg + self.draw.gripper_mass_offset_kg
        return m

    # -- geometry ----------------------------------------------------------

    def arm_base_world(self, state: WorldState | None = None) -> np.ndarray:
        s = state if state is not None else self.state
        cp, sp = math.cos(s.rpy[1]), math.sin(s.rpy[1])
        # pitch rotates the mount offset in the x-z plane
        off = np.array([
            cp * ARM_MOUNT_OFFSET[0] + sp * ARM_MOUNT_OFFSET[2],
            ARM_MOUNT_OFFSET[1],
            -sp * ARM_MOUNT_OFFSET[0] + cp * ARM_MOUNT_OFFSET[2],
        ])
        return s.pos + off

    def point_reachable(self, p_world: np.ndarray, state: WorldState | None = None) -> bool:
        """Conservative radial membership of a world point in the arm workspace."""
        base = self.arm_base_world(state)
        return float(np.linalg.norm(np.asarray(p_world) - base)) <= 0.95 * self.arm.reach

    def apply_lean(self, lean: LeanPosture) -> WorldState:
        """Tilt the base and drop its height, shifting the workspace down/forward."""
        self.state.rpy[1] += lean.pitch_rad
        self.state.pos[2] += lean.height_offset_m
        self.lean = LeanPosture(self.lean.pitch_rad + lean.pitch_rad,
                                max(-0.15, min(0.0, self.lean.height_offset_m + lean.height_offset_m)))
        return self.state

    # -- stepping ----------------------------------------------------------

    def step(
        self,
        leg_targets: np.ndarray,
        arm_targets: np.ndarray,
        gripper_target: float,
        dt: float = TICK_DT,
    ) -> RobotSnapshot:
        """Advance one tick.  Targets are absolute joint positions."""
        leg_targets = np.asarray(leg_targets, dtype=np.float64)
        arm_targets = np.asarray(arm_targets, dtype=np.float64)
        if (not np.all(np.isfinite(leg_targets)) or not np.all(np.isfinite(arm_targets))
                or not math.isfinite(gripper_target)):
            raise WorldFault("non-finite joint target")
        if leg_targets.shape != (12,) or arm_targets.shape != (6,):
            raise WorldFault("bad target shape")

        s = self.state
        motor = self.draw.motor_strength if self.draw is not None else 1.0
        friction = self.draw.friction if self.draw is not None else 1.0
        gain = 1.0 - math.exp(-dt * motor / JOINT_LAG_S)

        # joints: first-order lag toward targets
        arm_targets = self.arm.clamp(arm_targets)
        new_q_leg = s.q_leg + (leg_targets - s.q_leg) * gain
        new_q_arm = s.q_arm + (arm_targets - s.q_arm) * gain
        qd_leg = (new_q_leg - s.q_leg) / dt
        qd_arm = (new_q_arm - s.q_arm) / dt
        tau = np.concatenate([
            LEG_KP * motor * (leg_targets - new_q_leg),
            ARM_KP * motor * (arm_targets - new_q_arm),
        ])

        # base planar dynamics: commanded velocity realized in proportion to
        # how well the legs execute the gait
        ref = DEFAULT_Q_STAND + leg_reference_offsets(self.gait, s.time, self.cmd.vx, self.cmd.vy, self.cmd.wz)
        dref = leg_targets - ref
        # squared hinge: zero at full mismatch, slope does not vanish anywhere
        # in the working range (an exponential plateaus and stalls learning)
        competence = max(0.0, 1.0 - float(dref @ dref) / GAIT_COMPETENCE_SPAN) ** 2
        v_target = np.array([self.cmd.vx * competence, self.cmd.vy * competence, 0.0])
        wz_target = self.cmd.wz * competence
        k_base = (1.0 - math.exp(-dt / BASE_VEL_TAU_S)) * min(1.0, friction)
        v_base = s.v_base + (v_target - s.v_base) * k_base
        omega = s.omega_base.copy()
        omega[2] += (wz_target - omega[2]) * k_base

        # integrate planar pose
        yaw = s.rpy[2]
        cy, sy = math.cos(yaw), math.sin(yaw)
        pos = s.pos.copy()
        pos[0] += (cy * v_base[0] - sy * v_base[1]) * dt
        pos[1] += (sy * v_base[0] + cy * v_base[1]) * dt
        rpy = s.rpy.copy()
        rpy[2] = yaw + omega[2] * dt

        # feet follow the gait schedule
        h_foot, f_foot, v_foot, contact = self._feet(s.time + dt, v_base, friction)
        t_air = s.t_air.copy()
        first_contact = np.zeros(4)
        for i in range(4):
            if contact[i] == 0.0:
                t_air[i] = (t_air[i] if self._prev_contact[i] == 0.0 else 0.0) + dt
            elif self._prev_contact[i] == 0.0:
                first_contact[i] = 1.0      # keep accumulated air time for this snapshot
            else:
                t_air[i] = 0.0

        # gripper and tactile
        width = s.gripper_width + np.clip(gripper_target - s.gripper_width,
                                          -GRIPPER_SPEED * dt, GRIPPER_SPEED * dt)
        width = float(np.clip(width, 0.0, GRIPPER_MAX_WIDTH))
        obj = s.grasp_object
        damage = s.damage
        ee_pose = forward_kinematics(self.arm, new_q_arm, check_limits=False)
        ee_pos = ee_pose.pos + self._wobble_offset(new_q_leg, s.time + dt)
        tac = np.array([0.0, 0.5, 0.5, 0.5])
        if obj is not None and obj.present:
            obj_w = obj.width_mm / 1000.0
            if width < obj_w:
                width = max(width, 0.8 * obj_w)      # jaws stall on the object
                grip = float(np.clip((obj_w - width) / (0.2 * obj_w), 0.0, 1.0))
                ee_err = ee_pos - self.cmd.ee_pos_cmd
                shift = PATCH_SHIFT_MM_PER_M * ee_err[:2]
                offset = (
                    float(np.clip(tactile.SENSOR_CENTER_MM[0] + shift[0], 4.0, tactile.SENSOR_WIDTH_MM - 4.0)),
                    float(np.clip(tactile.SENSOR_CENTER_MM[1] + shift[1], 4.0, tactile.SENSOR_HEIGHT_MM - 4.0)),
                )
                e_ori = rot_log(quat_to_rot(self.cmd.ee_quat_cmd) @ quat_to_rot(ee_pose.quat).T)
                theta = tactile.wrap_half_pi(PATCH_THETA_GAIN * float(e_ori[0]))
                frame = tactile.render_contact(obj.width_mm, width * 1000.0, grip, offset, theta,
                                               timestamp=s.time + dt)
                desc = tactile.extract_descriptor(frame)
                tac = tactile.normalize_command(desc).values
                misalign = min(1.0, float(np.linalg.norm(shift)) / 33.0)
                if grip * GRIP_FORCE_FULL_N * (1.0 + MISALIGN_FORCE_GAIN * misalign) > obj.fragility_n:
                    damage = True

        action = np.concatenate([leg_targets, arm_targets])
        snap = RobotSnapshot(
            q_leg=new_q_leg, qd_leg=qd_leg, q_arm=new_q_arm, qd_arm=qd_arm,
            q_default=DEFAULT_Q_STAND.copy(), q_hung_leg=self.q_hung.copy(), tau=tau,
            v_base=v_base, omega_base=omega, f_foot=f_foot, v_foot=v_foot,
            h_foot=h_foot, t_air=t_air, first_contact=first_contact, contact=contact,
            prev_action=self._prev_targets.copy(), curr_action=action,
            prev_qd_leg=self._prev_qd_leg.copy(), prev_qd_arm=self._prev_qd_arm.copy(),
            prev_f_foot=self._prev_f_foot.copy(), prev_v_base=self._prev_v_base.copy(),
            prev_omega_base=self._prev_omega.copy(), dt=dt, ee_pos=ee_pos, tactile=tac,
        )

        # commit
        self._prev_targets = action
        self._prev_qd_leg = qd_leg
        self._prev_qd_arm = qd_arm
        self._prev_f_foot = f_foot
        self._prev_v_base = v_base
        self._prev_omega = omega
        self._prev_contact = contact
        t_air_next = t_air.copy()
        t_air_next[first_contact == 1.0] = 0.0
        self.state = WorldState(
            pos=pos, rpy=rpy, v_base=v_base, omega_base=omega,
            q_leg=new_q_leg, qd_leg=qd_leg, q_arm=new_q_arm, qd_arm=qd_arm,
            gripper_width=width, grasp_object=obj,
            h_foot=h_foot, f_foot=f_foot, v_foot=v_foot, t_air=t_air_next,
            contact=contact, time=s.time + dt, damage=damage,
        )
        return snap

    def _feet(self, t: float, v_base: np.ndarray, friction: float):
        """Schedule-driven foot state with a spring-damper stance proxy."""
        moving = abs(self.cmd.vx) + abs(self.cmd.vy) + abs(self.cmd.wz) > 1e-6
        if not moving:
            # standing: all feet loaded
            load = self.total_mass() * GRAVITY / 4.0
            pen = load / FOOT_STIFFNESS
            h = np.full(4, -pen)
            f = np.zeros((4, 3))
            f[:, 2] = load
            return h, f, np.zeros((4, 3)), np.ones(4)

        phi = foot_phases(self.gait, t)
        c_cmd = desired_contact(self.gait, t)
        n_stance = max(1.0, float(c_cmd.sum()))
        load = self.total_mass() * GRAVITY / n_stance
        pen = load / FOOT_STIFFNESS
        slip = max(0.0, 1.0 - friction)
        h = np.zeros(4)
        f = np.zeros((4, 3))
        v = np.zeros((4, 3))
        duty = self.gait.duty_factor
        omega_sw = self.gait.frequency_hz / (1.0 - duty)
        for i in range(4):
            if c_cmd[i] == 1.0:
                # stance: load ramps in over the first 20% of the phase
                s_st = phi[i] / duty
                ramp = min(1.0, s_st / 0.2)
                h[i] = -pen * ramp
                vz = -pen * (5.0 / duty) * self.gait.frequency_hz if s_st < 0.2 else 0.0
                f[i, 2] = max(0.0, FOOT_STIFFNESS * (-h[i]) - FOOT_DAMPING * vz)
                v[i, 0] = v_base[0] * slip
                v[i, 1] = v_base[1] * slip
                v[i, 2] = vz
            else:
                s_sw = (phi[i] - duty) / (1.0 - duty)
                h[i] = SWING_HEIGHT * math.sin(math.pi * s_sw)
                v[i, 2] = SWING_HEIGHT * math.pi * omega_sw * math.cos(math.pi * s_sw)
                v[i, 0] = 2.0 * v_base[0]
                v[i, 1] = 2.0 * v_base[1]
        return h, f, v, c_cmd.astype(np.float64)

    def _wobble_offset(self, q_leg: np.ndarray, t: float) -> np.ndarray:
        """Arm-base sway during fine manipulation, driven by leg posture error."""
        if not self.cmd.fine_manipulation:
            return np.zeros(3)
        dq = q_leg - self.q_hung
        amp = min(WOBBLE_CAP, WOBBLE_GAIN * float(dq @ dq))
        return amp * np.array([
            math.sin(2.0 * math.pi * WOBBLE_HZ[0] * t),
            math.cos(2.0 * math.pi * WOBBLE_HZ[1] * t),
            0.3 * math.sin(2.0 * math.pi * WOBBLE_HZ[2] * t),
        ])
