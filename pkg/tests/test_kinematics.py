import numpy as np
import pytest

from tactiloco.kinematics import (
    ArmModel,
    Pose,
    forward_kinematics,
    inverse_kinematics,
    jacobian,
    quat_conj,
    quat_mul,
    quat_to_rot,
    rot_log,
    rot_to_quat,
)


@pytest.fixture(scope="module")
def arm():
    return ArmModel()


def test_home_pose(arm):
    p = forward_kinematics(arm, np.zeros(6))
    np.testing.assert_allclose(p.pos, [0.55, 0.0, 0.10], atol=1e-12)
    np.testing.assert_allclose(p.quat, [1.0, 0.0, 0.0, 0.0], atol=1e-12)


def test_quaternion_round_trip():
    rng = np.random.default_rng(0)
    for _ in range(100):
        q = rng.normal(size=4)
        q /= np.linalg.norm(q)
        if q[0] < 0:
            q = -q
        r = quat_to_rot(q)
        # rotation matrix sanity
        np.testing.assert_allclose(r @ r.T, np.eye(3), atol=1e-12)
        assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-12)
        q2 = rot_to_quat(r)
        np.testing.assert_allclose(q2, q, atol=1e-9)


def test_quat_mul_matches_matrix_product():
    rng = np.random.default_rng(1)
    for _ in range(50):
        qa = rng.normal(size=4); qa /= np.linalg.norm(qa)
        qb = rng.normal(size=4); qb /= np.linalg.norm(qb)
        np.testing.assert_allclose(
            quat_to_rot(quat_mul(qa, qb)), quat_to_rot(qa) @ quat_to_rot(qb), atol=1e-12)
        np.testing.assert_allclose(
            quat_to_rot(quat_conj(qa)), quat_to_rot(qa).T, atol=1e-12)


def test_rot_log_inverse_of_small_rotations():
    rng = np.random.default_rng(2)
    for _ in range(50):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        angle = rng.uniform(-3.1, 3.1)
        w = axis * angle
        # Rodrigues formula as the independent reference
        K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]],
                      [-axis[1], axis[0], 0]])
        R = np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * (K @ K)
        got = rot_log(R)
        np.testing.assert_allclose(got, w, atol=1e-6)


def test_jacobian_matches_finite_differences(arm):
    rng = np.random.default_rng(3)
    eps = 1e-7
    for _ in range(20):
        q = rng.uniform(-1.0, 1.0, 6)
        jac = jacobian(arm, q)
        p0 = forward_kinematics(arm, q, check_limits=False)
        r0 = quat_to_rot(p0.quat)
        for j in range(6):
            dq = np.zeros(6)
            dq[j] = eps
            p1 = forward_kinematics(arm, q + dq, check_limits=False)
            dpos = (p1.pos - p0.pos) / eps
            np.testing.assert_allclose(jac[:3, j], dpos, atol=1e-5)
            dori = rot_log(quat_to_rot(p1.quat) @ r0.T) / eps
            np.testing.assert_allclose(jac[3:, j], dori, atol=1e-5)


def test_ik_round_trip_success_rate(arm):
    rng = np.random.default_rng(4)
    n, ok = 500, 0
    for _ in range(n):
        q_true = rng.uniform(*np.array(arm.joint_limits).T)
        target = forward_kinematics(arm, q_true, check_limits=False)
        res = inverse_kinematics(arm, target, max_iter=70)
        if res.success and res.pos_err < 1e-3:
            ok += 1
    assert ok / n >= 0.98, f"IK succeeded on only {ok}/{n} targets"


def test_ik_respects_limits(arm):
    rng = np.random.default_rng(5)
    for _ in range(20):
        q_true = rng.uniform(*np.array(arm.joint_limits).T)
        res = inverse_kinematics(arm, forward_kinematics(arm, q_true, check_limits=False),
                                 max_iter=50)
        assert arm.within_limits(res.q)


def test_fk_rejects_out_of_limits(arm):
    q = np.zeros(6)
    q[0] = 10.0
    with pytest.raises(ValueError):
        forward_kinematics(arm, q)
    # and permits it when told not to check
    forward_kinematics(arm, q, check_limits=False)


def test_unreachable_target_reports_failure(arm):
    target = Pose(np.array([2.0, 0.0, 0.0]), np.array([1.0, 0.0, 0.0, 0.0]))
    res = inverse_kinematics(arm, target, max_iter=20, restarts=2)
    assert not res.success
    assert res.pos_err > 1.0
