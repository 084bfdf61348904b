"""Low-level tracking policy and its two-stage PPO training.

Stage 1: stable locomotion + EE pose tracking on randomized commands with
spherical waypoints (realized through IK, with the policy refining the arm
residually).  Stage 2: continues from the stage-1 checkpoint on demo-derived
Cartesian trajectories with tactile channels in the observation and the
balance/track rewards active.

Policies are 2-hidden-layer MLPs (256, 128, ELU) emitting joint-target
offsets for 12 leg + 6 arm joints; checkpoints are plain name->array dicts.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn

from . import gait as gait_mod
from .commands import (
    BaseVelocityCommand,
    Workspace,
    reachability_command,
    sample_demo_trajectory,
    sample_spherical_waypoints,
)
from .demos import DemoDataset
from .kinematics import ArmModel, Pose, _dls_descend, forward_kinematics, inverse_kinematics, quat_to_rot
from .randomize import PushSchedule, RandomizationRanges, draw_episode, next_push
from .rewards import CommandBundle, RewardWeights, RobotSnapshot, total_reward, tracking_kernel
from .simworld import (
    DEFAULT_Q_HUNG,
    DEFAULT_Q_STAND,
    GRIPPER_MAX_WIDTH,
    GraspObject,
    SurrogateWorld,
    TICK_DT,
    leg_reference_offsets,
)

STAGE1_OBS_DIM = 78
STAGE2_OBS_DIM = 87
ACTION_DIM = 18
LEG_ACTION_SCALE = 0.5     # rad of joint offset per unit action
ARM_ACTION_SCALE = 0.1     # residual on the IK solution

EPISODE_TICKS = 800        # 4 s at 200 Hz
CMD_WINDOW_TICKS = 400     # 2 s look-ahead window for reachability commands
CMD_REFRESH_TICKS = 100    # recompute the base command every 0.5 s
ACTION_REPEAT = 4          # policy acts at the 50 Hz leg rate; world ticks at 200 Hz


@dataclass
class PpoConfig:
    """Defaults tuned for this surrogate: actions pay off within a few policy
    steps (base velocity settles in ~0.05 s), so a short credit horizon
    (small gamma/lambda) gives a far better advantage signal-to-noise ratio
    than the usual 0.99/0.95 and is what makes tracking learnable here."""

    clip_ratio: float = 0.2
    gamma: float = 0.05
    gae_lambda: float = 0.5
    epochs_per_batch: int = 6
    minibatch_size: int = 1024
    learning_rate: float = 1e-3
    entropy_coef: float = 0.0
    value_coef: float = 0.5
    n_envs: int = 64
    rollout_ticks: int = 32
    iterations: int = 80
    init_log_std: float = -1.6
    arm_mode: str = "residual"     # or "direct"

    def __post_init__(self):
        if not 0.0 < self.clip_ratio < 1.0:
            raise ValueError("clip ratio must lie in (0, 1)")
        for name in ("gamma", "gae_lambda"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1]")
        if self.arm_mode not in ("residual", "direct"):
            raise ValueError("arm_mode must be 'residual' or 'direct'")


class PolicyNet(nn.Module):
    def __init__(self, obs_dim: int, init_log_std: float = -2.3):
        super().__init__()
        self.obs_dim = obs_dim
        self.body = nn.Sequential(
            nn.Linear(obs_dim, 256), nn.ELU(),
            nn.Linear(256, 128), nn.ELU(),
        )
        self.mean = nn.Linear(128, ACTION_DIM)
        # start near zero action so early exploration is unbiased
        with torch.no_grad():
            self.mean.weight.mul_(0.01)
            self.mean.bias.zero_()
        self.log_std = nn.Parameter(torch.full((ACTION_DIM,), init_log_std))

    def forward(self, obs: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        mu = self.mean(self.body(obs))
        return mu, self.log_std.expand_as(mu)


class ValueNet(nn.Module):
    def __init__(self, obs_dim: int):
        super().__init__()
        self.body = nn.Sequential(
            nn.Linear(obs_dim, 256), nn.ELU(),
            nn.Linear(256, 128), nn.ELU(),
            nn.Linear(128, 1),
        )

    def forward(self, obs: torch.Tensor) -> torch.Tensor:
        return self.body(obs).squeeze(-1)


def params_from_net(net: PolicyNet) -> dict[str, np.ndarray]:
    out = {name: p.detach().numpy().copy() for name, p in net.state_dict().items()}
    out["__obs_dim__"] = np.array([net.obs_dim], dtype=np.int64)
    return out


def net_from_params(params: dict[str, np.ndarray]) -> PolicyNet:
    obs_dim = int(params["__obs_dim__"][0])
    net = PolicyNet(obs_dim)
    sd = {k: torch.tensor(v) for k, v in params.items() if k != "__obs_dim__"}
    net.load_state_dict(sd)
    return net


def migrate_params(params: dict[str, np.ndarray], new_obs_dim: int) -> dict[str, np.ndarray]:
    """Widen the input layer for extra observation channels (zero-initialized).

    Shrinking is refused: silently truncating inputs would discard learned
    structure.
    """
    old_dim = int(params["__obs_dim__"][0])
    if new_obs_dim == old_dim:
        return {k: v.copy() for k, v in params.items()}
    if new_obs_dim < old_dim:
        raise ValueError(f"cannot shrink observation dim {old_dim} -> {new_obs_dim}")
    out = {k: v.copy() for k, v in params.items()}
    w = out["body.0.weight"]
    out["body.0.weight"] = np.concatenate(
        [w, np.zeros((w.shape[0], new_obs_dim - old_dim), dtype=w.dtype)], axis=1)
    out["__obs_dim__"] = np.array([new_obs_dim], dtype=np.int64)
    return out


def policy_act(
    params: dict[str, np.ndarray],
    obs: np.ndarray,
    deterministic: bool = True,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Mean (or noise-perturbed) action for one observation vector."""
    obs = np.asarray(obs, dtype=np.float64)
    obs_dim = int(params["__obs_dim__"][0])
    if obs.shape != (obs_dim,):
        raise ValueError(f"observation must have dim {obs_dim}, got {obs.shape}")
    x = torch.tensor(obs, dtype=torch.float32).unsqueeze(0)
    net = net_from_params(params)
    with torch.no_grad():
        mu, log_std = net(x)
    a = mu.squeeze(0).numpy().astype(np.float64)
    if not deterministic:
        rng = rng or np.random.default_rng(0)
        a = a + np.exp(log_std.detach().squeeze(0).numpy()) * rng.standard_normal(ACTION_DIM)
    return a


# --------------------------------------------------------------------------
# observation assembly (shared with the runtime)

_OBS_SCALE_QD = 0.1
_OBS_SCALE_V = 1.0


def build_observation(
    snap_like: dict,
    cmd: CommandBundle,
    g: gait_mod.GaitCommand,
    t: float,
    stage: int,
) -> np.ndarray:
    """snap_like needs: v_base, omega_base, q_leg, qd_leg, q_arm, qd_arm, prev_action, tactile."""
    parts = [
        snap_like["v_base"] * _OBS_SCALE_V,
        snap_like["omega_base"] * _OBS_SCALE_V,
        snap_like["q_leg"] - DEFAULT_Q_STAND,
        snap_like["qd_leg"] * _OBS_SCALE_QD,
        snap_like["q_arm"],
        snap_like["qd_arm"] * _OBS_SCALE_QD,
        snap_like["prev_action"],
        gait_mod.phase_signals(g, t),
        np.array([cmd.vx, cmd.vy, cmd.wz]),
        cmd.ee_pos_cmd,
        cmd.ee_quat_cmd,
    ]
    if stage == 2:
        parts += [cmd.tactile_cmd, snap_like["tactile"],
                  np.array([1.0 if cmd.fine_manipulation else 0.0])]
    return np.concatenate(parts)


def snapshot_obs_fields(snap: RobotSnapshot) -> dict:
    return {
        "v_base": snap.v_base, "omega_base": snap.omega_base,
        "q_leg": snap.q_leg, "qd_leg": snap.qd_leg,
        "q_arm": snap.q_arm, "qd_arm": snap.qd_arm,
        "prev_action": snap.prev_action - np.concatenate([DEFAULT_Q_STAND, np.zeros(6)]),
        "tactile": snap.tactile,
    }


# --------------------------------------------------------------------------
# training environments

class TrackingIk:
    """Per-env incremental IK: a couple of damped iterations per target update."""

    def __init__(self, arm: ArmModel):
        self.arm = arm
        self.q = arm.default_q()

    def solve_full(self, target: Pose) -> np.ndarray:
        res = inverse_kinematics(self.arm, target, q_init=self.q, max_iter=100, restarts=4)
        self.q = res.q
        return self.q

    def track(self, pos: np.ndarray, quat: np.ndarray, iters: int = 1) -> np.ndarray:
        res = _dls_descend(self.arm, pos, quat_to_rot(quat), self.q,
                           tol=1e-4, ori_tol=0.01, max_iter=iters)
        self.q = res.q
        return self.q


class Stage1Env:
    """Locomotion + waypoint tracking with full Table-I randomization."""

    stage = 1
    obs_dim = STAGE1_OBS_DIM

    def __init__(self, seed: int, ranges: RandomizationRanges | None = None,
                 weights: RewardWeights | None = None, arm_mode: str = "residual",
                 eval_commands: bool = False, gait_shaping: float = 6.0):
        self.seed = seed
        # dense motion-prior shaping: penalizes deviation from the nominal
        # gait pattern for the commanded velocity.  Without it the sparse
        # velocity reward gives no gradient toward coordinated 12-D periodic
        # leg motion and on-policy training stalls at a standstill.
        self.gait_shaping = gait_shaping
        self.ranges = ranges or RandomizationRanges()
        self.weights = weights or RewardWeights()
        self.arm = ArmModel()
        self.gait = gait_mod.GaitCommand()
        self.arm_mode = arm_mode
        self.eval_commands = eval_commands
        self.rng = np.random.default_rng(seed)
        self._episode = 0
        self.reset()

    def reset(self) -> np.ndarray:
        self._episode += 1
        ep_seed = int(np.random.default_rng((self.seed, self._episode)).integers(2 ** 31))
        self.draw = draw_episode(self.ranges, ep_seed)
        self.world = SurrogateWorld(arm=self.arm, draw=self.draw, gait_cmd=self.gait)
        self.push_schedule = PushSchedule()
        self.push_rng = np.random.default_rng(ep_seed + 1)
        if self.eval_commands:
            # held-out regime: strong forward commands, zero lateral/yaw
            mag = float(self.rng.uniform(0.7, 0.8)) * (1 if self.rng.random() < 0.5 else -1)
            vx, vy, wz = mag, 0.0, 0.0
        elif self.rng.random() < 0.5:
            # forward-dominant episodes: without these the fast straight-line
            # regime is a measure-zero slice of the 3D command cube and the
            # policy never masters it
            mag = float(self.rng.uniform(0.4, 0.8)) * (1 if self.rng.random() < 0.5 else -1)
            vx, vy, wz = mag, 0.0, 0.0
        else:
            vx, vy, wz = self.draw.vx_cmd, self.draw.vy_cmd, self.draw.wz_cmd
        ws = Workspace.from_arm(self.arm)
        self.waypoints = sample_spherical_waypoints(
            self.rng, 4, (0.25, 0.85 * ws.r_max), workspace=ws)
        self._wp_idx = 0
        self._wp_clock = 0.0
        self.ik = TrackingIk(self.arm)
        self.cmd = CommandBundle(
            vx=vx, vy=vy, wz=wz,
            ee_pos_cmd=self.waypoints.poses[0].pos,
            ee_quat_cmd=self.waypoints.poses[0].quat,
            fine_manipulation=False,
        )
        self.world.set_command(self.cmd)
        self.q_ik = self.ik.solve_full(self.waypoints.poses[0])
        self.tick = 0
        self._last_snap = self.world.step(DEFAULT_Q_STAND, self.q_ik, GRIPPER_MAX_WIDTH)
        return self._obs()

    def _advance_waypoint(self):
        self._wp_clock += TICK_DT
        if self._wp_clock >= self.waypoints.hold_durations_s[self._wp_idx]:
            self._wp_clock = 0.0
            self._wp_idx = (self._wp_idx + 1) % len(self.waypoints.poses)
            wp = self.waypoints.poses[self._wp_idx]
            self.cmd.ee_pos_cmd = wp.pos
            self.cmd.ee_quat_cmd = wp.quat
            self.q_ik = self.ik.solve_full(wp)

    def _obs(self) -> np.ndarray:
        t = self.world.state.time
        return build_observation(snapshot_obs_fields(self._last_snap), self.cmd,
                                 self.gait, t, self.stage)

    def step(self, action: np.ndarray) -> tuple[np.ndarray, float, bool, dict]:
        leg_targets = DEFAULT_Q_STAND + LEG_ACTION_SCALE * action[:12]
        if self.arm_mode == "residual":
            arm_targets = self.q_ik + ARM_ACTION_SCALE * action[12:]
        else:
            arm_targets = self.arm.default_q() + action[12:]
        reward_sum = 0.0
        for _ in range(ACTION_REPEAT):
            self._advance_waypoint()
            push = next_push(self.push_schedule, self.world.state.time, self.push_rng)
            if push is not None:
                self.world.apply_push(push)
            t_before = self.world.state.time
            snap = self.world.step(leg_targets, arm_targets, GRIPPER_MAX_WIDTH)
            self.tick += 1
            breakdown = total_reward(snap, self.cmd, self.gait, self.world.state.time,
                                     self.weights)
            reward_sum += breakdown.total
            if self.gait_shaping:
                dref = leg_reference_offsets(self.gait, t_before,
                                             self.cmd.vx, self.cmd.vy, self.cmd.wz)
                d = leg_targets - (DEFAULT_Q_STAND + dref)
                reward_sum -= self.gait_shaping * float(d @ d)
        self._last_snap = snap
        done = self.tick >= EPISODE_TICKS
        info = {
            "kernel_vx": tracking_kernel(self.cmd.vx - snap.v_base[0], self.weights.sigma_vel),
            "ee_err": float(np.linalg.norm(self.cmd.ee_pos_cmd - snap.ee_pos)),
            "r_tac": breakdown.weighted("tactile_track"),
            "r_pos": breakdown.weighted("position_track"),
            "damage": self.world.state.damage,
        }
        obs = self._obs()
        if done:
            obs = self.reset()
        return obs, reward_sum / ACTION_REPEAT, done, info


class Stage2Env:
    """Demo-trajectory tracking with tactile channels and balance rewards."""

    stage = 2
    obs_dim = STAGE2_OBS_DIM

    def __init__(self, seed: int, dataset: DemoDataset,
                 grasp_object: GraspObject | None = None,
                 ranges: RandomizationRanges | None = None,
                 weights: RewardWeights | None = None, arm_mode: str = "residual",
                 posture_shaping: float = 6.0):
        if len(dataset) == 0:
            raise ValueError("stage-2 training needs a non-empty demo dataset")
        self.seed = seed
        # dense motion-prior shaping: during fine manipulation the legs
        # should hold the crouched (hung) pose -- that is what suppresses
        # the arm-base wobble coupling and makes precise EE placement
        # possible -- while during base repositioning they should follow
        # the nominal gait.  Without this prior the sparse tracking rewards
        # give no gradient toward either posture.
        self.posture_shaping = posture_shaping
        self.dataset = dataset
        self.obj = grasp_object or GraspObject(width_mm=30.0, fragility_n=8.0)
        self.ranges = ranges or RandomizationRanges()
        self.weights = weights or RewardWeights()
        self.arm = ArmModel()
        self.gait = gait_mod.GaitCommand()
        self.arm_mode = arm_mode
        self.rng = np.random.default_rng(seed)
        self._episode = 0
        self.reset()

    def reset(self) -> np.ndarray:
        self._episode += 1
        ep_seed = int(np.random.default_rng((self.seed, self._episode)).integers(2 ** 31))
        self.draw = draw_episode(self.ranges, ep_seed)
        self.world = SurrogateWorld(arm=self.arm, draw=self.draw, gait_cmd=self.gait,
                                    grasp_object=self.obj)
        # relative demo trajectory anchored at the arm's current EE pose
        traj = sample_demo_trajectory(self.dataset, self.rng)
        # resample to the control tick
        n = max(2, int(round(traj.shape[0] * 200.0 / self.dataset.tick_rate_hz)))
        grid = np.linspace(0, traj.shape[0] - 1, n)
        self.traj = np.stack([np.interp(grid, np.arange(traj.shape[0]), traj[:, j])
                              for j in range(traj.shape[1])], axis=1)
        start = forward_kinematics(self.arm, self.arm.default_q(), check_limits=False)
        self.anchor_pos = start.pos
        self.anchor_quat = start.quat
        self.workspace = Workspace.from_arm(self.arm)
        base_cmd = reachability_command(
            self.anchor_pos + self.traj[:CMD_WINDOW_TICKS, 0:3], self.workspace)
        fine = base_cmd.magnitude < 1e-9
        self.ik = TrackingIk(self.arm)
        self.cmd = CommandBundle(
            vx=base_cmd.vx, vy=base_cmd.vy, wz=0.0,
            ee_pos_cmd=self.anchor_pos + self.traj[0, 0:3],
            ee_quat_cmd=self.anchor_quat,
            gripper_width_cmd=float(self.traj[0, 7]),
            tactile_cmd=self.traj[0, 8:12].copy(),
            fine_manipulation=fine,
        )
        self.world.set_command(self.cmd)
        self.tick = 0
        self._last_snap = self.world.step(self.world.q_hung, self.ik.q, self.cmd.gripper_width_cmd)
        return self._obs()

    def _update_command(self):
        k = min(self.tick, self.traj.shape[0] - 1)
        if self.tick % CMD_REFRESH_TICKS == 0:
            window = self.anchor_pos + self.traj[k:k + CMD_WINDOW_TICKS, 0:3]
            base_cmd = reachability_command(window, self.workspace)
            self.cmd.vx, self.cmd.vy = base_cmd.vx, base_cmd.vy
            self.cmd.fine_manipulation = base_cmd.magnitude < 1e-9
        row = self.traj[k]
        self.cmd.ee_pos_cmd = self.anchor_pos + row[0:3]
        q_rel = row[3:7] / np.linalg.norm(row[3:7])
        from .kinematics import quat_mul
        self.cmd.ee_quat_cmd = quat_mul(self.anchor_quat, q_rel)
        self.cmd.gripper_width_cmd = float(row[7])
        self.cmd.tactile_cmd = row[8:12].copy()
        self.world.set_command(self.cmd)

    def _obs(self) -> np.ndarray:
        return build_observation(snapshot_obs_fields(self._last_snap), self.cmd,
                                 self.gait, self.world.state.time, self.stage)

    def step(self, action: np.ndarray) -> tuple[np.ndarray, float, bool, dict]:
        leg_targets = DEFAULT_Q_STAND + LEG_ACTION_SCALE * action[:12]
        reward_sum = 0.0
        for _ in range(ACTION_REPEAT):
            self._update_command()
            if self.arm_mode == "residual":
                q_ik = self.ik.track(self.cmd.ee_pos_cmd, self.cmd.ee_quat_cmd, iters=1)
                arm_targets = q_ik + ARM_ACTION_SCALE * action[12:]
            else:
                arm_targets = self.arm.default_q() + action[12:]
            t_before = self.world.state.time
            snap = self.world.step(leg_targets, arm_targets, self.cmd.gripper_width_cmd)
            self.tick += 1
            breakdown = total_reward(snap, self.cmd, self.gait, self.world.state.time,
                                     self.weights)
            reward_sum += breakdown.total
            if self.posture_shaping:
                if self.cmd.fine_manipulation:
                    ref = self.world.q_hung
                else:
                    ref = DEFAULT_Q_STAND + leg_reference_offsets(
                        self.gait, t_before, self.cmd.vx, self.cmd.vy, self.cmd.wz)
                d = leg_targets - ref
                reward_sum -= self.posture_shaping * float(d @ d)
        self._last_snap = snap
        done = self.tick >= min(self.traj.shape[0], EPISODE_TICKS * 3)
        info = {
            "kernel_vx": tracking_kernel(self.cmd.vx - snap.v_base[0], self.weights.sigma_vel),
            "ee_err": float(np.linalg.norm(self.cmd.ee_pos_cmd - snap.ee_pos)),
            "r_tac": breakdown.weighted("tactile_track"),
            "r_pos": breakdown.weighted("position_track"),
            "damage": self.world.state.damage,
        }
        obs = self._obs()
        if done:
            obs = self.reset()
        return obs, reward_sum / ACTION_REPEAT, done, info


# --------------------------------------------------------------------------
# PPO

def compute_gae(rewards: np.ndarray, values: np.ndarray, dones: np.ndarray,
                last_values: np.ndarray, gamma: float, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """rewards/values/dones: (T, N); last_values: (N,).  Returns (adv, returns)."""
    T, N = rewards.shape
    adv = np.zeros((T, N))
    gae = np.zeros(N)
    for t in reversed(range(T)):
        next_v = last_values if t == T - 1 else values[t + 1]
        mask = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_v * mask - values[t]
        gae = delta + gamma * lam * mask * gae
        adv[t] = gae
    return adv, adv + values


@dataclass
class TrainResult:
    params: dict[str, np.ndarray]
    metrics: list[dict] = field(default_factory=list)


def _ppo_train(envs: list, config: PpoConfig, seed: int,
               policy: PolicyNet, value: ValueNet,
               log_every: int = 1, progress: bool = False) -> TrainResult:
    torch.manual_seed(seed)
    # separate optimizers and separate gradient clipping: early in training the
    # value loss is orders of magnitude larger than the policy loss, and a
    # shared clip would scale the policy gradient to nothing
    opt_pi = torch.optim.Adam(policy.parameters(), lr=config.learning_rate)
    opt_v = torch.optim.Adam(value.parameters(), lr=config.learning_rate)
    gen = torch.Generator().manual_seed(seed)
    N = len(envs)
    T = config.rollout_ticks
    obs_dim = envs[0].obs_dim

    obs_now = np.stack([e._obs() for e in envs])
    metrics = []
    for it in range(config.iterations):
        obs_buf = np.zeros((T, N, obs_dim), dtype=np.float32)
        act_buf = np.zeros((T, N, ACTION_DIM), dtype=np.float32)
        logp_buf = np.zeros((T, N), dtype=np.float32)
        rew_buf = np.zeros((T, N))
        done_buf = np.zeros((T, N))
        val_buf = np.zeros((T, N))
        ep_info = {"kernel_vx": [], "ee_err": [], "r_tac": [], "r_pos": []}

        with torch.no_grad():
            for t in range(T):
                ot = torch.tensor(obs_now, dtype=torch.float32)
                mu, log_std = policy(ot)
                std = log_std.exp()
                noise = torch.randn(mu.shape, generator=gen)
                act = mu + std * noise
                logp = (-0.5 * (((act - mu) / std) ** 2 + 2 * log_std + math.log(2 * math.pi))).sum(-1)
                vals = value(ot)
                obs_buf[t] = obs_now
                act_buf[t] = act.numpy()
                logp_buf[t] = logp.numpy()
                val_buf[t] = vals.numpy()
                a_np = act.numpy().astype(np.float64)
                for i, env in enumerate(envs):
                    o, r, d, info = env.step(a_np[i])
                    obs_now[i] = o
                    rew_buf[t, i] = r
                    done_buf[t, i] = float(d)
                    for k in ep_info:
                        ep_info[k].append(info[k])
            last_vals = value(torch.tensor(obs_now, dtype=torch.float32)).numpy()

        if not np.all(np.isfinite(rew_buf)):
            raise RuntimeError(f"non-finite reward encountered at iteration {it}")
        adv, ret = compute_gae(rew_buf, val_buf, done_buf, last_vals,
                               config.gamma, config.gae_lambda)
        adv_flat = adv.reshape(-1)
        adv_flat = (adv_flat - adv_flat.mean()) / (adv_flat.std() + 1e-8)

        ob = torch.tensor(obs_buf.reshape(-1, obs_dim))
        ab = torch.tensor(act_buf.reshape(-1, ACTION_DIM))
        lp_old = torch.tensor(logp_buf.reshape(-1))
        advb = torch.tensor(adv_flat, dtype=torch.float32)
        retb = torch.tensor(ret.reshape(-1), dtype=torch.float32)
        n_samples = ob.shape[0]

        for _ in range(config.epochs_per_batch):
            perm = torch.randperm(n_samples, generator=gen)
            for start in range(0, n_samples, config.minibatch_size):
                idx = perm[start:start + config.minibatch_size]
                mu, log_std = policy(ob[idx])
                std = log_std.exp()
                logp = (-0.5 * (((ab[idx] - mu) / std) ** 2 + 2 * log_std
                                + math.log(2 * math.pi))).sum(-1)
                ratio = (logp - lp_old[idx]).exp()
                clipped = torch.clamp(ratio, 1 - config.clip_ratio, 1 + config.clip_ratio)
                pg_loss = -torch.min(ratio * advb[idx], clipped * advb[idx]).mean()
                v_loss = ((value(ob[idx]) - retb[idx]) ** 2).mean()
                entropy = (log_std + 0.5 * math.log(2 * math.pi * math.e)).sum()
                pi_loss = pg_loss - config.entropy_coef * entropy
                if not (torch.isfinite(pi_loss) and torch.isfinite(v_loss)):
                    raise RuntimeError(f"PPO loss is not finite at iteration {it}")
                opt_pi.zero_grad()
                pi_loss.backward()
                nn.utils.clip_grad_norm_(policy.parameters(), 1.0)
                opt_pi.step()
                opt_v.zero_grad()
                (config.value_coef * v_loss).backward()
                nn.utils.clip_grad_norm_(value.parameters(), 10.0)
                opt_v.step()

        row = {
            "iteration": it,
            "mean_reward": float(rew_buf.mean()),
            "mean_kernel_vx": float(np.mean(ep_info["kernel_vx"])),
            "mean_ee_err": float(np.mean(ep_info["ee_err"])),
            "mean_r_tac": float(np.mean(ep_info["r_tac"])),
            "mean_r_pos": float(np.mean(ep_info["r_pos"])),
        }
        metrics.append(row)
        if progress and it % log_every == 0:
            print(f"[ppo] it={it} reward={row['mean_reward']:.4f} "
                  f"kernel={row['mean_kernel_vx']:.3f} ee={row['mean_ee_err']:.3f}")
    return TrainResult(params_from_net(policy), metrics)


def train_stage1(config: PpoConfig | None = None, seed: int = 0,
                 ranges: RandomizationRanges | None = None,
                 weights: RewardWeights | None = None,
                 progress: bool = False) -> TrainResult:
    config = config or PpoConfig()
    torch.manual_seed(seed)
    policy = PolicyNet(STAGE1_OBS_DIM, config.init_log_std)
    value = ValueNet(STAGE1_OBS_DIM)
    envs = [Stage1Env(seed * 10_000 + i, ranges, weights, config.arm_mode)
            for i in range(config.n_envs)]
    return _ppo_train(envs, config, seed, policy, value, progress=progress)


def train_stage2(stage1_params: dict[str, np.ndarray], dataset: DemoDataset,
                 config: PpoConfig | None = None, seed: int = 0,
                 grasp_object: GraspObject | None = None,
                 weights: RewardWeights | None = None,
                 progress: bool = False) -> TrainResult:
    config = config or PpoConfig()
    torch.manual_seed(seed)
    params = migrate_params(stage1_params, STAGE2_OBS_DIM)
    policy = PolicyNet(STAGE2_OBS_DIM, config.init_log_std)
    sd = {k: torch.tensor(v) for k, v in params.items() if k != "__obs_dim__"}
    policy.load_state_dict(sd)
    value = ValueNet(STAGE2_OBS_DIM)
    envs = [Stage2Env(seed * 10_000 + i, dataset, grasp_object, None, weights, config.arm_mode)
            for i in range(config.n_envs)]
    return _ppo_train(envs, config, seed, policy, value, progress=progress)


# --------------------------------------------------------------------------
# evaluation

SCENARIOS = ("locomotion", "reach", "twist-cycle", "gentle-grasp")


def _scenario_env(scenario: str, seed: int, dataset: DemoDataset | None):
    if scenario == "locomotion":
        return Stage1Env(seed, eval_commands=True)
    tasks = {"reach": "reach", "twist-cycle": "twist", "gentle-grasp": "grasp"}
    objs = {"reach": GraspObject(30.0, 8.0), "twist-cycle": GraspObject(25.0, 50.0),
            "gentle-grasp": GraspObject(40.0, 3.0)}
    if dataset is None:
        from .demo_tasks import make_synthetic_demos
        dataset = make_synthetic_demos(tasks[scenario], 4, np.random.default_rng(seed))
    return Stage2Env(seed, dataset, grasp_object=objs[scenario])


def evaluate_policy(params: dict[str, np.ndarray], scenario: str,
                    n_episodes: int, seed: int = 0,
                    dataset: DemoDataset | None = None) -> dict:
    """Deterministic evaluation: mean/std of tracking metrics over episodes."""
    if scenario not in SCENARIOS:
        raise ValueError(f"scenario must be one of {SCENARIOS}")
    empty = {"episodes": 0, "kernel_vx_mean": 0.0, "kernel_vx_std": 0.0,
             "ee_err_mean": 0.0, "ee_err_std": 0.0, "r_tac_mean": 0.0,
             "r_pos_mean": 0.0, "completed": 0, "fragility_violations": 0,
             "violation_free_episodes": 0}
    if n_episodes == 0:
        return empty
    net = net_from_params(params)
    obs_dim = net.obs_dim
    per_ep = {"kernel_vx": [], "ee_err": [], "r_tac": [], "r_pos": [], "violations": []}
    completed = 0
    env = _scenario_env(scenario, seed, dataset)
    if env.obs_dim != obs_dim:
        raise ValueError(f"policy obs dim {obs_dim} does not match scenario {scenario} "
                         f"(needs {env.obs_dim})")
    for _ in range(n_episodes):
        obs = env._obs()
        acc = {"kernel_vx": [], "ee_err": [], "r_tac": [], "r_pos": []}
        damaged = False
        done = False
        while not done:
            with torch.no_grad():
                mu, _ = net(torch.tensor(obs, dtype=torch.float32).unsqueeze(0))
            obs, _, done, info = env.step(mu.squeeze(0).numpy().astype(np.float64))
            for k in acc:
                acc[k].append(info[k])
            damaged = damaged or info["damage"]
        for k in acc:
            per_ep[k].append(float(np.mean(acc[k])))
        per_ep["violations"].append(1 if damaged else 0)
        completed += 1
    return {
        "episodes": n_episodes,
        "kernel_vx_mean": float(np.mean(per_ep["kernel_vx"])),
        "kernel_vx_std": float(np.std(per_ep["kernel_vx"])),
        "ee_err_mean": float(np.mean(per_ep["ee_err"])),
        "ee_err_std": float(np.std(per_ep["ee_err"])),
        "r_tac_mean": float(np.mean(per_ep["r_tac"])),
        "r_pos_mean": float(np.mean(per_ep["r_pos"])),
        "completed": completed,
        "fragility_violations": int(np.sum(per_ep["violations"])),
        "violation_free_episodes": int(np.sum(1 - np.array(per_ep["violations"]))),
    }


def random_policy_params(obs_dim: int = STAGE1_OBS_DIM, seed: int = 123) -> dict[str, np.ndarray]:
    torch.manual_seed(seed)
    return params_from_net(PolicyNet(obs_dim))
