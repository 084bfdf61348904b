import math

import numpy as np
import pytest

from tactiloco.gait import GaitCommand, desired_contact
from tactiloco.kinematics import ArmModel, forward_kinematics
from tactiloco.randomize import RandomizationRanges, draw_episode
from tactiloco.rewards import CommandBundle
from tactiloco.simworld import (
    DEFAULT_Q_HUNG,
    DEFAULT_Q_STAND,
    GRIPPER_MAX_WIDTH,
    GraspObject,
    LeanPosture,
    SurrogateWorld,
    TICK_DT,
    WorldFault,
    leg_reference_offsets,
)


@pytest.fixture
def world():
    arm = ArmModel()
    draw = draw_episode(RandomizationRanges(), 0)
    return SurrogateWorld(arm=arm, draw=draw, gait_cmd=GaitCommand())


def _step_n(world, n, leg=None, arm_q=None, width=GRIPPER_MAX_WIDTH):
    leg = DEFAULT_Q_STAND if leg is None else leg
    arm_q = world.arm.default_q() if arm_q is None else arm_q
    snap = None
    for _ in range(n):
        snap = world.step(leg, arm_q, width)
    return snap


def test_tick_rate():
    assert TICK_DT == pytest.approx(1.0 / 200.0)


def test_time_advances(world):
    _step_n(world, 200)
    assert world.state.time == pytest.approx(1.0, abs=1e-9)


def test_nan_targets_raise_world_fault(world):
    leg = DEFAULT_Q_STAND.copy()
    leg[3] = float("nan")
    with pytest.raises(WorldFault):
        world.step(leg, world.arm.default_q(), GRIPPER_MAX_WIDTH)


def test_zero_command_keeps_base_still(world):
    world.set_command(CommandBundle())
    snap = _step_n(world, 400)
    assert np.linalg.norm(snap.v_base[:2]) < 0.05


def test_matched_gait_realizes_commanded_velocity():
    arm = ArmModel()
    draw = draw_episode(RandomizationRanges(), 1)
    draw.friction = 1.5           # plenty of grip
    w = SurrogateWorld(arm=arm, draw=draw, gait_cmd=GaitCommand())
    cmd = CommandBundle(vx=0.6)
    w.set_command(cmd)
    g = GaitCommand()
    vxs = []
    for k in range(600):
        t = w.state.time
        leg = DEFAULT_Q_STAND + leg_reference_offsets(g, t, 0.6, 0.0, 0.0)
        snap = w.step(leg, arm.default_q(), GRIPPER_MAX_WIDTH)
        vxs.append(snap.v_base[0])
    assert np.mean(vxs[200:]) == pytest.approx(0.6, abs=0.1)


def test_mismatched_gait_stalls():
    arm = ArmModel()
    draw = draw_episode(RandomizationRanges(), 1)
    w = SurrogateWorld(arm=arm, draw=draw, gait_cmd=GaitCommand())
    w.set_command(CommandBundle(vx=0.7))
    snap = _step_n(w, 400)                  # static stand, no gait
    assert abs(snap.v_base[0]) < 0.25       # far below the 0.7 commanded


def test_feet_follow_schedule(world):
    world.set_command(CommandBundle(vx=0.5))
    g = GaitCommand()
    agree = 0
    n = 400
    for _ in range(n):
        snap = _step_n(world, 1)
        c_cmd = desired_contact(g, world.state.time)
        agree += int(np.all(snap.contact == c_cmd))
    assert agree / n > 0.9


def test_air_time_bookkeeping(world):
    world.set_command(CommandBundle(vx=0.5))
    saw_first_contact = False
    for _ in range(600):
        snap = _step_n(world, 1)
        if np.any(snap.first_contact > 0):
            saw_first_contact = True
            touched = snap.first_contact > 0
            # at 2 Hz trot with duty 0.5, swing lasts 0.25 s
            np.testing.assert_allclose(snap.t_air[touched], 0.25, atol=0.02)
    assert saw_first_contact


def test_gripper_stalls_on_object():
    arm = ArmModel()
    obj = GraspObject(width_mm=40.0, fragility_n=50.0)
    w = SurrogateWorld(arm=arm, grasp_object=obj)
    snap = _step_n(w, 800, width=0.0)       # command fully closed
    # jaw stalls at 80% of the object width
    assert w.state.gripper_width == pytest.approx(0.8 * 0.040, abs=1e-6)
    assert snap.tactile[0] > 0.0            # contact registered


def test_fragile_object_damage():
    arm = ArmModel()
    obj = GraspObject(width_mm=40.0, fragility_n=1.0)   # very delicate
    w = SurrogateWorld(arm=arm, grasp_object=obj)
    _step_n(w, 800, width=0.0)
    assert w.state.damage


def test_gentle_grip_no_damage():
    arm = ArmModel()
    obj = GraspObject(width_mm=40.0, fragility_n=8.0)
    w = SurrogateWorld(arm=arm, grasp_object=obj)
    home = forward_kinematics(arm, arm.default_q(), check_limits=False)
    w.set_command(CommandBundle(ee_pos_cmd=home.pos, ee_quat_cmd=home.quat))
    _step_n(w, 800, width=0.98 * 0.040)
    assert not w.state.damage


def test_wobble_active_only_during_fine_manipulation():
    arm = ArmModel()
    draw = draw_episode(RandomizationRanges(), 2)
    ee_home = forward_kinematics(arm, arm.default_q(), check_limits=False).pos

    def ee_spread(fine: bool, leg: np.ndarray) -> float:
        w = SurrogateWorld(arm=arm, draw=draw, gait_cmd=GaitCommand())
        w.set_command(CommandBundle(fine_manipulation=fine))
        pts = []
        for _ in range(400):
            snap = w.step(leg, arm.default_q(), GRIPPER_MAX_WIDTH)
            pts.append(snap.ee_pos.copy())
        return float(np.ptp(np.array(pts)[200:, 1]))

    stand = np.asarray(DEFAULT_Q_STAND)
    hung = np.asarray(DEFAULT_Q_HUNG)
    assert ee_spread(False, stand) < 1e-6           # no sway when flag off
    sway_stand = ee_spread(True, stand)
    sway_hung = ee_spread(True, hung)
    assert sway_stand > 0.05                        # standing tall: big sway
    assert sway_hung < 0.2 * sway_stand             # crouched: nearly steady


def test_push_changes_velocity(world):
    world.set_command(CommandBundle())
    _step_n(world, 100)
    v_before = world.state.v_base.copy()
    world.apply_push(np.array([0.4, 0.0]))
    snap = _step_n(world, 1)
    assert snap.v_base[0] - v_before[0] > 0.2


def test_lean_posture_validation():
    with pytest.raises(ValueError):
        LeanPosture(pitch_rad=0.6, height_offset_m=0.0)
    with pytest.raises(ValueError):
        LeanPosture(pitch_rad=0.0, height_offset_m=0.1)
    LeanPosture(pitch_rad=0.2, height_offset_m=-0.05)


def test_leg_reference_scales_with_command():
    g = GaitCommand()
    small = leg_reference_offsets(g, 0.3, 0.2, 0.0, 0.0)
    large = leg_reference_offsets(g, 0.3, 0.8, 0.0, 0.0)
    zero = leg_reference_offsets(g, 0.3, 0.0, 0.0, 0.0)
    assert np.all(zero == 0.0)
    assert np.linalg.norm(large) > np.linalg.norm(small)
