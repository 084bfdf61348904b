"""End-to-end acceptance suite.

One test per acceptance criterion.  Each prints a single summary line

    [ACCEPTANCE] Cnn <name>: PASS|FAIL (runtime Xs / budget Ys)

with the pinned tolerances baked into the assertions.  The learning
criteria (C09-C11) perform real training runs and dominate the suite's
wall-clock time; everything else completes in seconds.
"""

import math
import time

import numpy as np
import pytest
import torch
import yaml
from scipy import stats

from _oracles import oracle_terms, random_command, random_snapshot
from test_tactile import _oracle_descriptor


# --------------------------------------------------------------------------
# reporting helper

def _report(num: int, name: str, t0: float, budget_s: float, failures: list):
    elapsed = time.monotonic() - t0
    if elapsed > budget_s:
        failures.append(f"runtime {elapsed:.1f}s exceeds budget {budget_s:.0f}s")
    verdict = "PASS" if not failures else "FAIL"
    print(f"\n[ACCEPTANCE] C{num:02d} {name}: {verdict} "
          f"(runtime {elapsed:.1f}s / budget {budget_s:.0f}s)")
    assert not failures, f"C{num:02d} {name}: " + "; ".join(failures)


# --------------------------------------------------------------------------
# C01 reward oracle suite

def test_c01_reward_oracle_suite():
    """Every reward term matches an independent straight-line oracle to
    1e-10 on 1000 random snapshots; default weights are pinned exactly."""
    from tactiloco.gait import GaitCommand
    from tactiloco.rewards import RewardWeights, total_reward

    t0 = time.monotonic()
    failures = []

    expected_weights = (2.0, 0.5, 2.0, 1.0, -2.0, -2.0, -2.5e-5, -7.5e-7,
                        -0.015, -2.0e-4, -0.08, 0.02, 0.005, 0.1, 0.1, 0.06)
    order = ("lin_vel_x", "yaw_vel", "feet_air_time", "feet_height",
             "swing_phase_force", "stance_phase_velocity", "joint_torques",
             "joint_acceleration", "action_rate", "feet_jerk", "feet_drag",
             "base_stable", "leg_posture", "smooth", "tactile_track",
             "position_track")
    w = RewardWeights()
    got = tuple(getattr(w, n) for n in order)
    if got != expected_weights:
        failures.append(f"default weights {got} != pinned {expected_weights}")

    g = GaitCommand()
    rng = np.random.default_rng(2024)
    bad = 0
    for _ in range(1000):
        snap = random_snapshot(rng)
        cmd = random_command(rng)
        t = float(rng.uniform(0.0, 10.0))
        b = total_reward(snap, cmd, g, t, w)
        want = oracle_terms(snap, cmd, g, t, w)
        for name, raw in want.items():
            raw_got = b.terms[name][0]
            if abs(raw_got - raw) > 1e-10:
                bad += 1
    if bad:
        failures.append(f"{bad} term evaluations off by more than 1e-10")
    _report(1, "reward oracle suite (tol 1e-10, 1000 snapshots)", t0, 10.0, failures)


# --------------------------------------------------------------------------
# C02 randomization ranges + pushes

def test_c02_randomization_ranges_and_pushes():
    """10000 draws inside the documented bounds; pushes at 3 s intervals
    with magnitude <= 0.5 m/s; chi-square uniformity p > 0.01."""
    from tactiloco.randomize import (PushSchedule, RandomizationRanges,
                                     draw_episode, next_push)

    t0 = time.monotonic()
    failures = []

    bounds = {
        "friction": (0.3, 3.0), "base_mass_offset_kg": (0.0, 2.5),
        "com_shift_m": (-0.15, 0.15), "motor_strength": (0.7, 1.3),
        "gripper_mass_offset_kg": (0.0, 0.3), "vx_cmd": (-0.8, 0.8),
        "vy_cmd": (-0.8, 0.8), "wz_cmd": (-0.8, 0.8),
        "init_pos_perturb_m": (0.0, 0.5),
        "init_yaw_rad": (-math.pi / 2, math.pi / 2),
        "init_vel_perturb_ms": (0.0, 0.1), "init_joint_scale": (0.8, 1.2),
    }
    ranges = RandomizationRanges()
    out_of_bounds = 0
    for seed in range(10_000):
        d = draw_episode(ranges, seed).as_dict()
        for name, (lo, hi) in bounds.items():
            if not lo <= d[name] <= hi:
                out_of_bounds += 1
    if out_of_bounds:
        failures.append(f"{out_of_bounds} draw fields outside Table bounds")

    sched = PushSchedule()
    if sched.interval_s != 3.0 or sched.max_magnitude_ms != 0.5:
        failures.append("push schedule defaults are not 3 s / 0.5 m/s")
    rng = np.random.default_rng(0)
    dt = 1.0 / 200.0
    times = []
    for k in range(int(30.0 / dt)):
        t = k * dt
        p = next_push(sched, t, rng)
        if p is not None:
            times.append(t)
            if np.linalg.norm(p) > 0.5 + 1e-12:
                failures.append(f"push magnitude {np.linalg.norm(p)} > 0.5")
    if not np.allclose(np.diff(times), 3.0, atol=dt):
        failures.append(f"push intervals {np.diff(times)} not 3 s")

    sched2 = PushSchedule()
    rng2 = np.random.default_rng(7)
    angles, t = [], 0.0
    while len(angles) < 2000:
        p = next_push(sched2, t, rng2)
        if p is not None:
            angles.append(math.atan2(p[1], p[0]))
        t += 1.5
    hist, _ = np.histogram(angles, bins=16, range=(-math.pi, math.pi))
    _, pval = stats.chisquare(hist)
    if pval <= 0.01:
        failures.append(f"push direction chi-square p={pval} <= 0.01")
    _report(2, "randomization ranges + push schedule", t0, 10.0, failures)


# --------------------------------------------------------------------------
# C03 reachability command bounds

def test_c03_reachability_bounds():
    """10000 random target sequences: magnitude in {0} u [0.3, 0.8] m/s
    with zero violations; direction matches accumulated exceedance to 1e-9."""
    from tactiloco.commands import (BASE_CMD_MAX, BASE_CMD_MIN, Workspace,
                                    reachability_command)

    t0 = time.monotonic()
    failures = []
    ws = Workspace(0.1, 0.5)
    rng = np.random.default_rng(11)
    mag_violations = dir_violations = 0
    for _ in range(10_000):
        n = int(rng.integers(1, 8))
        targets = rng.uniform(-1.0, 1.0, (n, 3))
        cmd = reachability_command(targets, ws)
        mag = math.hypot(cmd.vx, cmd.vy)
        if not (mag == 0.0 or BASE_CMD_MIN - 1e-9 <= mag <= BASE_CMD_MAX + 1e-9):
            mag_violations += 1
        # independent exceedance oracle
        acc = np.zeros(2)
        for p in targets:
            d = math.hypot(p[0], p[1])
            if d > ws.d_thresh:
                acc += (d - ws.d_thresh) * np.array([p[0], p[1]]) / d
        acc /= n
        if np.linalg.norm(acc) < 1e-15:
            if mag != 0.0:
                dir_violations += 1
        else:
            want = acc / np.linalg.norm(acc)
            got = np.array([cmd.vx, cmd.vy]) / mag
            if np.max(np.abs(got - want)) > 1e-9:
                dir_violations += 1
    if mag_violations:
        failures.append(f"{mag_violations} magnitude violations")
    if dir_violations:
        failures.append(f"{dir_violations} direction mismatches beyond 1e-9")
    _report(3, "reachability command bounds ({0} u [0.3,0.8] m/s, dir tol 1e-9)",
            t0, 10.0, failures)


# --------------------------------------------------------------------------
# C04 tactile round trip

def test_c04_tactile_round_trip():
    """render -> extract recovers orientation within 0.1 rad, center within
    one taxel pitch, area within 15% over 200 draws; descriptor matches a
    brute-force moment oracle to 1e-10."""
    from tactiloco.tactile import (DEFAULT_THRESHOLD, MAX_AREA_MM2, N_COLS,
                                   N_ROWS, PITCH_U_MM, PITCH_V_MM,
                                   TactileFrame, extract_descriptor,
                                   render_contact, wrap_half_pi)

    t0 = time.monotonic()
    failures = []
    rng = np.random.default_rng(7)
    bad_area = bad_center = bad_theta = 0
    for _ in range(200):
        force = rng.uniform(0.5, 1.0)
        obj_w = rng.uniform(30.0, 45.0)
        area_target = rng.uniform(150.0, 350.0)
        grip_w = obj_w - area_target / (150.0 * force)
        theta = rng.uniform(-0.5, 0.5)
        off = (rng.uniform(18.0, 30.0), rng.uniform(10.0, 14.0))
        d = extract_descriptor(render_contact(obj_w, grip_w, force, off, theta))
        area_expected = min(150.0 * force * (obj_w - grip_w), 0.8 * MAX_AREA_MM2)
        if abs(d.area_mm2 - area_expected) > 0.15 * area_expected:
            bad_area += 1
        if abs(d.center_mm[0] - off[0]) >= PITCH_U_MM or \
           abs(d.center_mm[1] - off[1]) >= PITCH_V_MM:
            bad_center += 1
        if area_expected > 140.0 and abs(wrap_half_pi(d.theta_rad - theta)) >= 0.1:
            bad_theta += 1
    if bad_area:
        failures.append(f"{bad_area}/200 areas off by more than 15%")
    if bad_center:
        failures.append(f"{bad_center}/200 centers off by a taxel pitch")
    if bad_theta:
        failures.append(f"{bad_theta}/200 orientations off by 0.1 rad")

    oracle_bad = 0
    for _ in range(50):
        cells = rng.random((N_ROWS, N_COLS)) * (rng.random((N_ROWS, N_COLS)) < 0.3)
        got = extract_descriptor(TactileFrame(cells, 0.0))
        want = _oracle_descriptor(cells, DEFAULT_THRESHOLD)
        if abs(got.area_mm2 - want.area_mm2) > 1e-10 or \
           np.max(np.abs(np.array(got.center_mm) - np.array(want.center_mm))) > 1e-10 or \
           abs(wrap_half_pi(got.theta_rad - want.theta_rad)) > 1e-8:
            oracle_bad += 1
    if oracle_bad:
        failures.append(f"{oracle_bad}/50 descriptors disagree with moment oracle")
    _report(4, "tactile round trip (0.1 rad / 1 pitch / 15%, oracle 1e-10)",
            t0, 10.0, failures)


# --------------------------------------------------------------------------
# C05 kinematics

def test_c05_kinematics():
    """FK Jacobian vs central differences < 1e-5; IK round trip position
    error < 1e-3 m with >= 98% success on 500 reachable targets."""
    from tactiloco.kinematics import (ArmModel, forward_kinematics,
                                      inverse_kinematics, jacobian,
                                      quat_to_rot, rot_log)

    t0 = time.monotonic()
    failures = []
    arm = ArmModel()
    rng = np.random.default_rng(3)
    eps = 1e-7
    worst = 0.0
    for _ in range(20):
        q = rng.uniform(-1.0, 1.0, 6)
        jac = jacobian(arm, q)
        p0 = forward_kinematics(arm, q, check_limits=False)
        r0 = quat_to_rot(p0.quat)
        for j in range(6):
            dq = np.zeros(6)
            dq[j] = eps
            p1 = forward_kinematics(arm, q + dq, check_limits=False)
            worst = max(worst, float(np.max(np.abs(jac[:3, j] - (p1.pos - p0.pos) / eps))))
            dori = rot_log(quat_to_rot(p1.quat) @ r0.T) / eps
            worst = max(worst, float(np.max(np.abs(jac[3:, j] - dori))))
    if worst >= 1e-5:
        failures.append(f"Jacobian vs finite differences worst error {worst:.2e} >= 1e-5")

    rng = np.random.default_rng(4)
    ok = 0
    n = 500
    for _ in range(n):
        q_true = rng.uniform(*np.array(arm.joint_limits).T)
        target = forward_kinematics(arm, q_true, check_limits=False)
        res = inverse_kinematics(arm, target, max_iter=70)
        if res.success and res.pos_err < 1e-3:
            ok += 1
    if ok / n < 0.98:
        failures.append(f"IK solved only {ok}/{n} targets (< 98%)")
    _report(5, "kinematics (Jacobian 1e-5, IK 98% @ 1e-3 m)", t0, 30.0, failures)


# --------------------------------------------------------------------------
# C06 DDIM correctness

def test_c06_ddim_correctness():
    """Zero-noise sampling matches the closed-form rescale to 1e-9; fixed
    seeds are byte-exact; a single datum is overfit to within 0.05 per
    normalized channel inside the 5 min budget."""
    from tactiloco.diffusion import (CHUNK_CHANNELS, ChunkNormalizer,
                                     Denoiser, NoiseSchedule, PolicyBundle,
                                     ddim_sample, ddim_zero_noise_reference,
                                     train_denoiser)

    t0 = time.monotonic()
    failures = []

    class ZeroNet(Denoiser):
        def forward(self, chunk, cond, t):
            return torch.zeros_like(chunk)

    model = ZeroNet(obs_dim=4, history=2, horizon=16)
    ident = ChunkNormalizer(lo=np.full(12, -1.0), hi=np.full(12, 1.0))
    obs_ident = ChunkNormalizer(lo=np.full(4, -1.0), hi=np.full(4, 1.0))
    bundle = PolicyBundle(model, NoiseSchedule(100), ident, obs_ident)
    obs = np.zeros((2, 4))
    for n_steps in (1, 16, 100):
        out = ddim_sample(bundle, obs, n_steps=n_steps, seed=5)
        gen = torch.Generator().manual_seed(5)
        x0 = torch.randn((1, CHUNK_CHANNELS, 16), generator=gen).double().numpy()[0].T
        expected = ddim_zero_noise_reference(bundle.schedule, x0, n_steps)
        err = float(np.max(np.abs(out - expected)))
        if err > 1e-9:
            failures.append(f"zero-noise mismatch {err:.2e} > 1e-9 at {n_steps} steps")

    a = ddim_sample(bundle, obs, n_steps=16, seed=9)
    b = ddim_sample(bundle, obs, n_steps=16, seed=9)
    if a.tobytes() != b.tobytes():
        failures.append("same-seed samples are not byte-identical")
    if a.tobytes() == ddim_sample(bundle, obs, n_steps=16, seed=10).tobytes():
        failures.append("different seeds produced identical samples")

    # single-datum overfit: replicate the datum so every optimizer step sees
    # a full batch of (t, noise) draws
    rng = np.random.default_rng(0)
    obs1 = rng.normal(0, 1, (1, 2, 8))
    chunk1 = rng.normal(0, 1, (1, 16, 12))
    bundle2 = train_denoiser(np.repeat(obs1, 64, axis=0),
                             np.repeat(chunk1, 64, axis=0),
                             NoiseSchedule(100), epochs=3000, batch_size=64,
                             lr=3e-3, seed=0)
    out = ddim_sample(bundle2, obs1[0], n_steps=16, seed=1)
    errn = float(np.max(np.abs(bundle2.chunk_norm.normalize(out[None])[0]
                               - bundle2.chunk_norm.normalize(chunk1)[0])))
    if errn > 0.05:
        failures.append(f"overfit error {errn:.4f} > 0.05 per normalized channel")
    _report(6, "DDIM correctness (oracle 1e-9, byte determinism, overfit 0.05)",
            t0, 300.0, failures)


# --------------------------------------------------------------------------
# C07 denoiser gradients

def test_c07_denoiser_gradients():
    """Analytic parameter gradients match central finite differences within
    1e-4 relative on a reduced float64 model."""
    from tactiloco.diffusion import Denoiser

    t0 = time.monotonic()
    failures = []
    torch.manual_seed(0)
    model = Denoiser(obs_dim=3, history=2, horizon=4, widths=(8, 12),
                     temb_dim=8).double()
    gen = torch.Generator().manual_seed(1)
    chunk = torch.randn((2, 12, 4), generator=gen, dtype=torch.float64)
    cond = torch.randn((2, 6), generator=gen, dtype=torch.float64)
    tt = torch.tensor([3, 7])
    eps = torch.randn(chunk.shape, generator=gen, dtype=torch.float64)

    def loss_fn():
        return ((model(chunk, cond, tt) - eps) ** 2).mean()

    loss = loss_fn()
    model.zero_grad()
    loss.backward()
    rng = np.random.default_rng(0)
    checked = bad = 0
    for name, p in model.named_parameters():
        flat, gflat = p.data.view(-1), p.grad.view(-1)
        for idx in rng.choice(flat.numel(), size=min(4, flat.numel()), replace=False):
            h = 1e-6
            orig = flat[idx].item()
            flat[idx] = orig + h
            lp = loss_fn().item()
            flat[idx] = orig - h
            lm = loss_fn().item()
            flat[idx] = orig
            fd = (lp - lm) / (2 * h)
            an = gflat[idx].item()
            if abs(fd - an) / max(abs(fd), abs(an), 1e-8) >= 1e-4:
                bad += 1
            checked += 1
    if checked <= 40:
        failures.append(f"only {checked} parameters checked")
    if bad:
        failures.append(f"{bad}/{checked} gradients beyond 1e-4 relative")
    _report(7, "denoiser gradients (FD rel 1e-4)", t0, 60.0, failures)


# --------------------------------------------------------------------------
# C08 rate schedule

def test_c08_rate_schedule():
    """A 200-tick episode emits exactly 50/10/2 leg/arm/high-level updates;
    100k-tick counting is exact."""
    from tactiloco.runtime import RateSchedule

    t0 = time.monotonic()
    failures = []
    r = RateSchedule()
    counts = tuple(sum(r.due(t, d) for t in range(200))
                   for d in (r.leg_divisor, r.arm_divisor, r.high_level_divisor))
    if counts != (50, 10, 2):
        failures.append(f"200-tick emissions {counts} != (50, 10, 2)")
    n = 100_000
    counts = tuple(sum(r.due(t, d) for t in range(n))
                   for d in (r.leg_divisor, r.arm_divisor, r.high_level_divisor))
    if counts != (25_000, 5_000, 1_000):
        failures.append(f"100k-tick emissions {counts} != (25000, 5000, 1000)")
    _report(8, "rate schedule (exact emission counts)", t0, 5.0, failures)


# --------------------------------------------------------------------------
# C09/C10 shared training fixture

@pytest.fixture(scope="session")
def stage1_trained():
    """Full stage-1 training run under the acceptance configuration."""
    from tactiloco.lowlevel import PpoConfig, train_stage1

    t0 = time.monotonic()
    res = train_stage1(PpoConfig(), seed=0)
    return res.params, time.monotonic() - t0


def test_c09_stage1_learning(stage1_trained):
    """<= 30 min CPU training with 64 envs; held-out velocity-tracking
    kernel > 0.7 for the trained policy vs < 0.2 for a random policy
    (>= 3x the random baseline)."""
    from tactiloco.lowlevel import (STAGE1_OBS_DIM, evaluate_policy,
                                    random_policy_params)

    t0 = time.monotonic()
    failures = []
    params, train_s = stage1_trained
    if train_s > 1800.0:
        failures.append(f"training took {train_s:.0f}s > 1800s")
    trained = evaluate_policy(params, "locomotion", n_episodes=8, seed=99)
    rand = evaluate_policy(random_policy_params(STAGE1_OBS_DIM, seed=123),
                           "locomotion", n_episodes=8, seed=99)
    k_t, k_r = trained["kernel_vx_mean"], rand["kernel_vx_mean"]
    if k_t <= 0.7:
        failures.append(f"trained kernel {k_t:.3f} <= 0.7")
    if k_r >= 0.2:
        failures.append(f"random kernel {k_r:.3f} >= 0.2")
    if k_t < 3.0 * k_r:
        failures.append(f"trained/random ratio {k_t / max(k_r, 1e-9):.2f} < 3")
    print(f"\n  stage-1: train {train_s:.0f}s, trained kernel {k_t:.3f}, "
          f"random kernel {k_r:.3f}")
    _report(9, "stage-1 learning (kernel >0.7 vs <0.2, >=3x, <=30 min)",
            t0 - train_s, 1800.0 + 120.0, failures)


def test_c10_stage2_tactile_benefit(stage1_trained):
    """Stage-2 mean (r_tac + r_pos) exceeds the frozen stage-1 policy's by
    >= 50% on held-out demo-derived sequences; gentle-grasp fragility
    violations are zero in >= 18/20 episodes."""
    from tactiloco.demos import DemoDataset
    from tactiloco.demo_tasks import make_synthetic_demos
    from tactiloco.lowlevel import (PpoConfig, STAGE2_OBS_DIM,
                                    evaluate_policy, migrate_params,
                                    train_stage2)

    t0 = time.monotonic()
    failures = []
    s1_params, _ = stage1_trained

    rng = np.random.default_rng(7)
    demos = []
    for task in ("reach", "twist", "grasp"):
        demos.extend(make_synthetic_demos(task, 4, rng).demos)
    train_ds = DemoDataset(10.0, demos)
    cfg = PpoConfig(n_envs=16, rollout_ticks=32, iterations=50)
    res = train_stage2(s1_params, train_ds, cfg, seed=0)
    frozen = migrate_params(s1_params, STAGE2_OBS_DIM)

    held = {"gentle-grasp": make_synthetic_demos("grasp", 6, np.random.default_rng(1234)),
            "twist-cycle": make_synthetic_demos("twist", 6, np.random.default_rng(4321))}
    sums = {}
    violations = {}
    for label, params in (("stage2", res.params), ("frozen", frozen)):
        total = 0.0
        for scen, ds in held.items():
            m = evaluate_policy(params, scen, n_episodes=20, seed=555, dataset=ds)
            total += m["r_tac_mean"] + m["r_pos_mean"]
            if scen == "gentle-grasp":
                violations[label] = m["fragility_violations"]
        sums[label] = total / len(held)
    ratio = sums["stage2"] / max(sums["frozen"], 1e-9)
    print(f"\n  stage-2 (r_tac+r_pos) {sums['stage2']:.4f} vs frozen "
          f"{sums['frozen']:.4f} (ratio {ratio:.2f}); gentle-grasp violations "
          f"{violations['stage2']}/20")
    if ratio < 1.5:
        failures.append(f"(r_tac+r_pos) ratio {ratio:.2f} < 1.5")
    if 20 - violations["stage2"] < 18:
        failures.append(f"only {20 - violations['stage2']}/20 gentle-grasp "
                        "episodes violation-free (need >= 18)")
    _report(10, "stage-2 tactile benefit (+50% r_tac+r_pos, 18/20 violation-free)",
            t0, 1200.0, failures)


# --------------------------------------------------------------------------
# C11 end-to-end pipeline smoke

PIPELINE_CONFIG = {
    "seed": 5,
    "ppo": {"n_envs": 8, "rollout_ticks": 16, "iterations": 3,
            "minibatch_size": 256, "epochs_per_batch": 2},
    "diffusion": {"train_steps": 50, "epochs": 4, "ddim_steps": 8},
    "tasks": {"names": ["reach", "twist", "grasp"], "demos_per_task": 20},
    "runtime": {"duration_s": 4.0},
}


def test_c11_pipeline_smoke(tmp_path):
    """gen-demos(20) -> train-low(1) -> train-low(2) -> train-high ->
    rollout -> eval -> plot-data all exit 0 in < 60 min; repeated
    fixed-seed rollouts are byte-identical."""
    from tactiloco import cli

    t0 = time.monotonic()
    failures = []
    cfg = tmp_path / "run.yaml"
    cfg.write_text(yaml.safe_dump(PIPELINE_CONFIG))
    demos = str(tmp_path / "demos")
    p1 = str(tmp_path / "stage1.ckpt")
    p2 = str(tmp_path / "stage2.ckpt")
    hi = str(tmp_path / "high.ckpt")
    log1 = str(tmp_path / "rollout1.csv")
    log2 = str(tmp_path / "rollout2.csv")
    plot = str(tmp_path / "plot.csv")

    steps = [
        ("gen-demos", ["gen-demos", "--config", str(cfg), "--out", demos]),
        ("train-low-1", ["train-low", "--config", str(cfg), "--out", p1]),
        ("train-low-2", ["train-low", "--config", str(cfg), "--stage", "2",
                         "--init", p1, "--demos", demos, "--out", p2]),
        ("train-high", ["train-high", "--config", str(cfg), "--demos", demos,
                        "--out", hi]),
        ("rollout", ["rollout", "--config", str(cfg), "--policy", p2,
                     "--demos", demos, "--out", log1]),
        ("rollout-repeat", ["rollout", "--config", str(cfg), "--policy", p2,
                            "--demos", demos, "--out", log2]),
        ("eval", ["eval", "--config", str(cfg), "--policy", p1,
                  "--scenario", "locomotion", "--episodes", "2"]),
        ("plot-data", ["plot-data", "--log", log1, "--out", plot]),
    ]
    for name, argv in steps:
        rc = cli.main(argv)
        if rc != 0:
            failures.append(f"{name} exited {rc}")
            break
    else:
        with open(log1, "rb") as fa, open(log2, "rb") as fb:
            if fa.read() != fb.read():
                failures.append("fixed-seed rollouts are not byte-identical")
    _report(11, "pipeline smoke (all exit 0, byte-identical rollouts)",
            t0, 3600.0, failures)
