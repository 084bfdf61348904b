"""Scripted synthetic demonstrations, replacing teleoperated data collection.

Three desk-scale task analogs:

* ``reach``  — reach-and-grasp: approach an object, close, hold.
* ``twist``  — cyclic grasp-twist-release on a valve-like object.
* ``grasp``  — gentle-grasp: close softly on a fragile object, never
  exceeding its fragility threshold.

Each demo runs a scripted controller through the surrogate world (tactile
channels come from the forward contact model) and records
(t, EE pose, gripper width, tactile descriptor) at 10 Hz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .demos import Demo, DemoDataset
from .diffusion import (
    DEFAULT_HISTORY,
    DEFAULT_HORIZON,
    DEFAULT_VISUAL_DIM,
    OBS_LOW_DIM,
    VisualFeatureProvider,
)

OBS_DIM_DEFAULT = DEFAULT_VISUAL_DIM + OBS_LOW_DIM
from .kinematics import ArmModel, Pose, forward_kinematics, inverse_kinematics, _dls_descend, quat_to_rot
from .rewards import CommandBundle
from .simworld import GRIPPER_MAX_WIDTH, SurrogateWorld, GraspObject, TICK_DT

RECORD_HZ = 10.0
HIGH_LEVEL_HZ = 2.0

TASKS = ("reach", "twist", "grasp")

_OBJECTS = {
    "reach": GraspObject(width_mm=30.0, fragility_n=8.0),    # kiwi-like
    "twist": GraspObject(width_mm=25.0, fragility_n=50.0),   # valve knob
    "grasp": GraspObject(width_mm=40.0, fragility_n=3.0),    # chip-like
}


@dataclass
class _Segment:
    duration: float
    pos_to: np.ndarray
    width_to: float
    twist_to: float = 0.0


def _script(task: str, obj: GraspObject, rng: np.random.Generator) -> list[_Segment]:
    # everything stays inside the near-workspace band so the runtime treats
    # these as fine-manipulation trajectories (no base repositioning needed)
    home = np.array([0.32, 0.0, 0.12])
    target = np.array([
        0.30 + rng.uniform(-0.03, 0.03),
        rng.uniform(-0.06, 0.06),
        0.02 + rng.uniform(0.0, 0.04),
    ])
    w_open = GRIPPER_MAX_WIDTH
    obj_w = obj.width_mm / 1000.0
    if task == "reach":
        w_grip = 0.93 * obj_w
        return [
            _Segment(1.5, target, w_open),
            _Segment(1.0, target, w_grip),
            _Segment(1.5, target + np.array([0.0, 0.0, 0.08]), w_grip),
        ]
    if task == "twist":
        w_grip = 0.9 * obj_w
        segs = [_Segment(1.5, target, w_open)]
        for _ in range(2):
            segs += [
                _Segment(0.8, target, w_grip),                       # grasp
                _Segment(1.2, target, w_grip, twist_to=0.5),         # twist
                _Segment(0.8, target, w_open, twist_to=0.5),         # release
                _Segment(0.8, target, w_open, twist_to=0.0),         # untwist
            ]
        return segs
    if task == "grasp":
        # fragile: keep normalized grip below fragility (chip 3 N at 20 N full squeeze)
        w_grip = 0.98 * obj_w
        return [
            _Segment(1.8, target, w_open),
            _Segment(1.2, target, w_grip),
            _Segment(1.5, target, w_grip),
            _Segment(1.0, target, w_open),
        ]
    raise ValueError(f"unknown task {task!r}; expected one of {TASKS}")


def _run_script(segments: list[_Segment], obj: GraspObject) -> Demo:
    arm = ArmModel()
    world = SurrogateWorld(arm=arm, grasp_object=obj)
    q_arm = world.state.q_arm.copy()
    start = forward_kinematics(arm, q_arm, check_limits=False)

    records = []
    record_every = int(round(1.0 / (RECORD_HZ * TICK_DT)))
    tick = 0
    pos_from = start.pos.copy()
    width_from = GRIPPER_MAX_WIDTH
    twist_from = 0.0
    for seg in segments:
        n_ticks = int(round(seg.duration / TICK_DT))
        for k in range(n_ticks):
            s = (k + 1) / n_ticks
            s_smooth = 0.5 - 0.5 * math.cos(math.pi * s)      # ease in/out
            pos = pos_from + (seg.pos_to - pos_from) * s_smooth
            width = width_from + (seg.width_to - width_from) * s_smooth
            twist = twist_from + (seg.twist_to - twist_from) * s_smooth
            half = 0.5 * twist
            quat = np.array([math.cos(half), math.sin(half), 0.0, 0.0])  # roll about tool axis
            target = Pose(pos, quat)

            world.set_command(CommandBundle(
                ee_pos_cmd=pos, ee_quat_cmd=quat, gripper_width_cmd=width,
                fine_manipulation=True,
            ))
            # tracking IK: a few damped iterations per tick from the previous solution
            res = _dls_descend(arm, target.pos, quat_to_rot(quat), q_arm,
                               tol=1e-4, ori_tol=0.01, max_iter=3)
            q_arm = res.q
            snap = world.step(world.q_hung, q_arm, width)
            if world.state.damage:
                raise RuntimeError("scripted demo damaged the object; script is mis-tuned")
            if tick % record_every == 0:
                ee = forward_kinematics(arm, snap.q_arm, check_limits=False)
                records.append(np.concatenate([
                    [world.state.time], ee.pos, ee.quat,
                    [world.state.gripper_width], snap.tactile,
                ]))
            tick += 1
        pos_from = seg.pos_to.copy()
        width_from = seg.width_to
        twist_from = seg.twist_to
    return Demo(np.array(records))


def make_synthetic_demos(task: str, n: int, rng: np.random.Generator) -> DemoDataset:
    """n scripted demos of one task; n = 0 gives a valid empty dataset."""
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}; expected one of {TASKS}")
    demos = [_run_script(_script(task, _OBJECTS[task], rng), _OBJECTS[task]) for _ in range(n)]
    return DemoDataset(RECORD_HZ, demos)


def scene_state(record: np.ndarray, obj: GraspObject) -> np.ndarray:
    """Ground-truth scene vector fed to the visual-feature projection."""
    return np.concatenate([record[1:8], [record[8], obj.width_mm / 100.0], record[9:13]])


def make_training_pairs(
    dataset: DemoDataset,
    task: str = "reach",
    history: int = DEFAULT_HISTORY,
    horizon: int = DEFAULT_HORIZON,
    visual: VisualFeatureProvider | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Assemble (observation history, action chunk) pairs at the high-level rate.

    Poses are expressed relative to each demo's first sample.  Returns
    (n, history, obs_dim) and (n, horizon, 12) arrays.
    """
    obj = _OBJECTS[task]
    if visual is None:
        visual = VisualFeatureProvider(state_dim=13)
    stride = int(round(dataset.tick_rate_hz / HIGH_LEVEL_HZ))
    obs_out, chunk_out = [], []
    for demo in dataset.demos:
        rec = demo.records.copy()
        rec[:, 1:4] -= rec[0, 1:4]            # relative position convention
        hl = rec[::stride]
        n_hl = len(hl)
        if n_hl < history + 1:
            continue
        for k in range(history - 1, n_hl - 1):
            obs = []
            for j in range(k - history + 1, k + 1):
                row = hl[j]
                obs.append(np.concatenate([visual(scene_state(row, obj)), row[1:13]]))
            chunk_rows = []
            for j in range(k + 1, k + 1 + horizon):
                row = hl[min(j, n_hl - 1)]
                chunk_rows.append(row[1:13])
            obs_out.append(np.stack(obs))
            chunk_out.append(np.stack(chunk_rows))
    if not obs_out:
        return (np.zeros((0, history, OBS_DIM_DEFAULT)), np.zeros((0, horizon, 12)))
    return np.stack(obs_out), np.stack(chunk_out)
