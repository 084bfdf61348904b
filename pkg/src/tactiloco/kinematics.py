"""6-DoF serial arm kinematics: closed-form FK, geometric Jacobian, DLS IK.

The default chain approximates a small desk-scale arm with ~0.55 m reach:
base yaw, three pitch joints, a wrist yaw and a wrist roll whose axis runs
through the tool point (so the last joint never moves the EE position).
Quaternions are (w, x, y, z).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_AXES = {
    "x": np.array([1.0, 0.0, 0.0]),
    "y": np.array([0.0, 1.0, 0.0]),
    "z": np.array([0.0, 0.0, 1.0]),
}


def _axis_rot(axis: np.ndarray, q: float) -> np.ndarray:
    """Rotation matrix about a unit axis (Rodrigues)."""
    c, s = math.cos(q), math.sin(q)
    x, y, z = axis
    C = 1.0 - c
    return np.array([
        [c + x * x * C, x * y * C - z * s, x * z * C + y * s],
        [y * x * C + z * s, c + y * y * C, y * z * C - x * s],
        [z * x * C - y * s, z * y * C + x * s, c + z * z * C],
    ])


def rot_to_quat(r: np.ndarray) -> np.ndarray:
    """Rotation matrix -> unit quaternion (w, x, y, z), w >= 0."""
    tr = r[0, 0] + r[1, 1] + r[2, 2]
    if tr > 0.0:
        s = math.sqrt(tr + 1.0) * 2.0
        q = np.array([0.25 * s, (r[2, 1] - r[1, 2]) / s,
                      (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s])
    elif r[0, 0] >= r[1, 1] and r[0, 0] >= r[2, 2]:
        s = math.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2.0
        q = np.array([(r[2, 1] - r[1, 2]) / s, 0.25 * s,
                      (r[0, 1] + r[1, 0]) / s, (r[0, 2] + r[2, 0]) / s])
    elif r[1, 1] >= r[2, 2]:
        s = math.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2.0
        q = np.array([(r[0, 2] - r[2, 0]) / s, (r[0, 1] + r[1, 0]) / s,
                      0.25 * s, (r[1, 2] + r[2, 1]) / s])
    else:
        s = math.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2.0
        q = np.array([(r[1, 0] - r[0, 1]) / s, (r[0, 2] + r[2, 0]) / s,
                      (r[1, 2] + r[2, 1]) / s, 0.25 * s])
    if q[0] < 0.0:
        q = -q
    return q / np.linalg.norm(q)


def quat_to_rot(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ])


def quat_conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def rot_log(r: np.ndarray) -> np.ndarray:
    """Rotation vector (axis * angle) of a rotation matrix."""
    cos_a = max(-1.0, min(1.0, (np.trace(r) - 1.0) / 2.0))
    angle = math.acos(cos_a)
    if angle < 1e-12:
        return np.zeros(3)
    if angle > math.pi - 1e-6:
        # near pi: extract axis from the symmetric part
        d = np.diag(r)
        axis = np.sqrt(np.maximum((d + 1.0) / 2.0, 0.0))
        axis[1] = math.copysign(axis[1], r[0, 1])
        axis[2] = math.copysign(axis[2], r[0, 2])
        n = np.linalg.norm(axis)
        return angle * axis / n if n > 0 else np.zeros(3)
    v = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    return v * (angle / (2.0 * math.sin(angle)))


@dataclass
class Pose:
    pos: np.ndarray                 # (3,) m
    quat: np.ndarray                # (4,) w,x,y,z unit

    def __post_init__(self):
        self.pos = np.asarray(self.pos, dtype=np.float64)
        self.quat = np.asarray(self.quat, dtype=np.float64)
        self.quat = self.quat / np.linalg.norm(self.quat)

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.pos, self.quat])

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.zeros(3), np.array([1.0, 0, 0, 0]))


@dataclass
class ArmModel:
    """Serial chain: per joint a fixed pre-translation and a rotation axis,
    then a tool translation after the last joint."""

    axes: tuple[str, ...] = ("z", "y", "y", "y", "z", "x")
    pre_translations: tuple[tuple[float, float, float], ...] = (
        (0.0, 0.0, 0.055),
        (0.0, 0.0, 0.045),
        (0.24, 0.0, 0.0),
        (0.21, 0.0, 0.0),
        (0.05, 0.0, 0.0),
        (0.03, 0.0, 0.0),
    )
    tool_translation: tuple[float, float, float] = (0.02, 0.0, 0.0)
    joint_limits: tuple[tuple[float, float], ...] = (
        (-2.9, 2.9), (-1.57, 1.57), (-2.4, 2.4),
        (-1.57, 1.57), (-2.9, 2.9), (-2.9, 2.9),
    )

    @property
    def n_joints(self) -> int:
        return len(self.axes)

    @property
    def reach(self) -> float:
        """Length of the chain unrolled from the shoulder: upper bound on radial reach."""
        return float(sum(np.linalg.norm(t) for t in self.pre_translations[2:])
                     + np.linalg.norm(self.tool_translation))

    def clamp(self, q: np.ndarray) -> np.ndarray:
        lims = np.asarray(self.joint_limits)
        return np.clip(q, lims[:, 0], lims[:, 1])

    def within_limits(self, q: np.ndarray, tol: float = 1e-9) -> bool:
        lims = np.asarray(self.joint_limits)
        return bool(np.all(q >= lims[:, 0] - tol) and np.all(q <= lims[:, 1] + tol))

    def default_q(self) -> np.ndarray:
        """Elbow-bent nominal configuration used as the IK seed."""
        return np.array([0.0, 0.5, -1.0, 0.5, 0.0, 0.0])


def forward_kinematics(arm: ArmModel, q: np.ndarray, check_limits: bool = True) -> Pose:
    """EE pose in the arm-base frame."""
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (arm.n_joints,):
        raise ValueError(f"expected {arm.n_joints} joint angles")
    if check_limits and not arm.within_limits(q):
        raise ValueError("joint angles outside limits")
    r = np.eye(3)
    p = np.zeros(3)
    for i in range(arm.n_joints):
        p = p + r @ np.asarray(arm.pre_translations[i])
        r = r @ _axis_rot(_AXES[arm.axes[i]], q[i])
    p = p + r @ np.asarray(arm.tool_translation)
    return Pose(p, rot_to_quat(r))


def _fk_jac(arm: ArmModel, q: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One chain pass returning (EE position, EE rotation, geometric Jacobian)."""
    r = np.eye(3)
    p = np.zeros(3)
    n = arm.n_joints
    origins = np.zeros((n, 3))
    axes_w = np.zeros((n, 3))
    for i in range(n):
        p = p + r @ np.asarray(arm.pre_translations[i])
        origins[i] = p
        axes_w[i] = r @ _AXES[arm.axes[i]]
        r = r @ _axis_rot(_AXES[arm.axes[i]], q[i])
    p_ee = p + r @ np.asarray(arm.tool_translation)
    jac = np.zeros((6, n))
    jac[:3] = np.cross(axes_w, p_ee - origins).T
    jac[3:] = axes_w.T
    return p_ee, r, jac


def jacobian(arm: ArmModel, q: np.ndarray) -> np.ndarray:
    """Geometric Jacobian (6 x n): rows 0-2 linear, 3-5 angular, base frame."""
    return _fk_jac(arm, np.asarray(q, dtype=np.float64))[2]


@dataclass
class IkResult:
    success: bool
    q: np.ndarray
    pos_err: float
    ori_err: float
    iterations: int


def _wrap_pi(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def _has_analytic_structure(arm: ArmModel) -> bool:
    """True for the z-y-y-y-z-x chain with z offsets before the shoulder and
    x offsets after the elbow, which admits a closed-form branch enumeration."""
    if arm.axes != ("z", "y", "y", "y", "z", "x"):
        return False
    t = [np.asarray(v) for v in arm.pre_translations] + [np.asarray(arm.tool_translation)]
    return (all(v[0] == 0.0 and v[1] == 0.0 for v in t[:2])
            and all(v[1] == 0.0 and v[2] == 0.0 for v in t[2:]))


def _analytic_candidates(arm: ArmModel, p: np.ndarray, r_t: np.ndarray) -> list[np.ndarray]:
    """All closed-form IK branches for the default chain (within joint limits).

    With axes z-y-y-y-z-x the orientation factors as
    Rz(q1) Ry(q2+q3+q4) Rz(q5) Rx(q6), and since the roll axis and tool offset
    are collinear the position depends only on q1..q5.  Writing s = q2+q3+q4,
    the base-yaw consistency condition is a pure sinusoid in q1, the wrist
    angles follow from a Y-Z-X Euler extraction, and q2, q3 solve a planar
    two-link problem.  Enumerates yaw roots x wrist branches x elbow branches.
    """
    lims = np.asarray(arm.joint_limits)
    z0 = arm.pre_translations[0][2] + arm.pre_translations[1][2]
    l1 = arm.pre_translations[2][0]
    l2 = arm.pre_translations[3][0]
    a = arm.pre_translations[4][0]
    b = arm.pre_translations[5][0] + arm.tool_translation[0]

    # q1 roots of  cos(q1) (p_y - b R10) - sin(q1) (p_x - b R00) = 0
    base = math.atan2(p[1] - b * r_t[1, 0], p[0] - b * r_t[0, 0])
    q1s = [q1 for k in (-2, -1, 0, 1, 2)
           if lims[0, 0] <= (q1 := base + k * math.pi) <= lims[0, 1]]

    out: list[np.ndarray] = []
    for q1 in q1s:
        c1, s1 = math.cos(q1), math.sin(q1)
        rz_inv = np.array([[c1, s1, 0.0], [-s1, c1, 0.0], [0.0, 0.0, 1.0]])
        m = rz_inv @ r_t                       # = Ry(s) Rz(q5) Rx(q6)
        pp = rz_inv @ p - np.array([0.0, 0.0, z0])
        s5 = max(-1.0, min(1.0, m[1, 0]))
        for q5 in (math.asin(s5), _wrap_pi(math.pi - math.asin(s5))):
            c5 = math.cos(q5)
            if abs(c5) < 1e-9:                 # wrist gimbal: ambiguous split
                continue
            if not (lims[4, 0] <= q5 <= lims[4, 1]):
                continue
            q6 = math.atan2(-m[1, 2] / c5, m[1, 1] / c5)
            s_sum = math.atan2(-m[2, 0] / c5, m[0, 0] / c5)
            if not (lims[5, 0] <= q6 <= lims[5, 1]):
                continue
            # planar 2R for q2, q3 in the xz-plane of the post-yaw frame
            wx = a + b * c5
            vx = pp[0] - math.cos(s_sum) * wx
            vz = pp[2] + math.sin(s_sum) * wx
            d2 = vx * vx + vz * vz
            c3 = (d2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)
            if abs(c3) > 1.0 + 1e-9:
                continue
            c3 = max(-1.0, min(1.0, c3))
            for q3 in (math.acos(c3), -math.acos(c3)):
                phi = math.atan2(-vz, vx)
                psi = math.atan2(l2 * math.sin(q3), l1 + l2 * math.cos(q3))
                q2 = _wrap_pi(phi - psi)
                q4 = _wrap_pi(s_sum - q2 - q3)
                q = np.array([q1, q2, q3, q4, q5, q6])
                if arm.within_limits(q, tol=1e-9):
                    out.append(q)
    return out


def inverse_kinematics(
    arm: ArmModel,
    target: Pose,
    q_init: np.ndarray | None = None,
    tol: float = 1e-3,
    max_iter: int = 200,
    ori_tol: float = 0.02,
    restarts: int = 19,
) -> IkResult:
    """Damped least-squares IK with joint-limit clamping per iteration.

    Non-convergence returns ``success=False`` with the best-effort joint
    vector and residual.  When the first descent stalls, deterministic
    seeded restarts re-seed the guess across the joint range (base yaw
    biased toward the target bearing).
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    q0 = arm.default_q() if q_init is None else np.asarray(q_init, dtype=np.float64).copy()
    r_target = quat_to_rot(target.quat)
    lims = np.asarray(arm.joint_limits)

    if _has_analytic_structure(arm):
        best: IkResult | None = None
        for q_cand in _analytic_candidates(arm, target.pos, r_target):
            # a few damped iterations polish closed-form rounding
            result = _dls_descend(arm, target.pos, r_target, q_cand, tol, ori_tol, 10)
            if result.success:
                return result
            if best is None or (result.pos_err + 0.05 * result.ori_err
                                < best.pos_err + 0.05 * best.ori_err):
                best = result
        if best is not None and best.pos_err < 10 * tol:
            return best

    yaw = math.atan2(target.pos[1], target.pos[0])
    # deterministic but target-dependent restarts: identical targets resolve
    # identically, while nearby targets explore different basins
    digest = hash((round(float(target.pos[0]), 9), round(float(target.pos[1]), 9),
                   round(float(target.pos[2]), 9), round(float(target.quat[0]), 9),
                   round(float(target.quat[1]), 9))) & 0x7FFFFFFF
    restart_rng = np.random.default_rng(12345 + digest)

    best: IkResult | None = None
    for attempt in range(restarts + 1):
        if attempt == 0:
            q = q0.copy()
        elif attempt == 1:
            q = q0.copy()
            q[0] = np.clip(yaw, lims[0, 0], lims[0, 1])
        else:
            q = restart_rng.uniform(lims[:, 0], lims[:, 1])
            q[0] = np.clip(yaw + restart_rng.normal(0.0, 0.3), lims[0, 0], lims[0, 1])
        result = _dls_descend(arm, target.pos, r_target, q, tol, ori_tol, max_iter)
        if result.success:
            return result
        if best is None or result.pos_err + 0.05 * result.ori_err < best.pos_err + 0.05 * best.ori_err:
            best = result
    return best


def _dls_descend(arm, p_target, r_target, q, tol, ori_tol, max_iter) -> IkResult:
    best_q, best_pe, best_oe = q.copy(), np.inf, np.inf
    for it in range(max_iter):
        p_ee, r_ee, jac = _fk_jac(arm, q)
        e_pos = p_target - p_ee
        e_ori = rot_log(r_target @ r_ee.T)
        pe, oe = float(np.linalg.norm(e_pos)), float(np.linalg.norm(e_ori))
        if pe + 0.05 * oe < best_pe + 0.05 * best_oe:
            best_q, best_pe, best_oe = q.copy(), pe, oe
        if pe < tol and oe < ori_tol:
            return IkResult(True, q, pe, oe, it)
        # orientation pulls harder once the position is roughly in place
        w_ori = 1.0 if pe < 0.05 else 0.3
        err = np.concatenate([e_pos, w_ori * e_ori])
        lam2 = 1e-4 + 0.1 * float(err @ err)
        dq = jac.T @ np.linalg.solve(jac @ jac.T + lam2 * np.eye(6), err)
        step = np.linalg.norm(dq)
        if step > 1.0:
            dq /= step
        q = arm.clamp(q + dq)
    # the last step was never scored inside the loop; evaluate it now
    p_ee, r_ee, _ = _fk_jac(arm, q)
    pe = float(np.linalg.norm(p_target - p_ee))
    oe = float(np.linalg.norm(rot_log(r_target @ r_ee.T)))
    if pe < tol and oe < ori_tol:
        return IkResult(True, q, pe, oe, max_iter)
    if pe + 0.05 * oe < best_pe + 0.05 * best_oe:
        best_q, best_pe, best_oe = q, pe, oe
    return IkResult(False, best_q, best_pe, best_oe, max_iter)
