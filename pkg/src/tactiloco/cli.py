"""Command-line entry points.

Subcommands: gen-demos, train-low, train-high, rollout, eval, plot-data.
Exit codes: 0 success, 1 usage error, 2 validation error (bad config /
arguments / files), 3 runtime fault (diverged training, world fault, ...).
Set TACTILOCO_LOG=debug|info|warning to control verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3

log = logging.getLogger("tactiloco")


def _setup_logging():
    level = os.environ.get("TACTILOCO_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _load_config(path):
    from .config import load_config
    return load_config(path)


def _demos_path(demo_dir, task: str) -> Path:
    return Path(demo_dir) / f"{task}.demos"


def cmd_gen_demos(args) -> int:
    from .demo_tasks import make_synthetic_demos
    cfg = _load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)
    for task in cfg.tasks.names:
        ds = make_synthetic_demos(task, cfg.tasks.demos_per_task, rng)
        path = _demos_path(out, task)
        ds.save(path)
        log.info("wrote %d %s demos to %s", len(ds), task, path)
        print(f"{task}: {len(ds)} demos -> {path}")
    return EXIT_OK


def cmd_train_low(args) -> int:
    from .checkpoint import load_policy, save_policy
    from .demos import DemoDataset
    from .lowlevel import train_stage1, train_stage2
    from .simworld import GraspObject
    cfg = _load_config(args.config)
    if args.stage == 1:
        result = train_stage1(cfg.ppo, seed=cfg.seed, ranges=cfg.randomization,
                              weights=cfg.rewards, progress=args.progress)
    else:
        if not args.init:
            raise ValueError("--init (stage-1 checkpoint) is required for stage 2")
        if not args.demos:
            raise ValueError("--demos is required for stage 2")
        init_params, _ = load_policy(args.init)
        task = cfg.tasks.names[0]
        ds = DemoDataset.load(_demos_path(args.demos, task))
        obj = GraspObject(cfg.world.object_width_mm, cfg.world.fragility_n)
        result = train_stage2(init_params, ds, cfg.ppo, seed=cfg.seed,
                              grasp_object=obj, weights=cfg.rewards,
                              progress=args.progress)
    meta = {"config_hash": cfg.config_hash, "seed": cfg.seed, "stage": args.stage,
            "final_metrics": result.metrics[-1] if result.metrics else {}}
    save_policy(args.out, result.params, meta)
    print(f"stage-{args.stage} policy -> {args.out} (config {cfg.config_hash})")
    return EXIT_OK


def cmd_train_high(args) -> int:
    import torch

    from .checkpoint import save_checkpoint
    from .demo_tasks import make_training_pairs
    from .demos import DemoDataset
    from .diffusion import NoiseSchedule, train_denoiser
    cfg = _load_config(args.config)
    task = args.task or cfg.tasks.names[0]
    if task not in cfg.tasks.names:
        raise ValueError(f"task {task!r} not in configured tasks {cfg.tasks.names}")
    ds = DemoDataset.load(_demos_path(args.demos, task))
    obs, chunks = make_training_pairs(ds, task, history=cfg.diffusion.history,
                                      horizon=cfg.diffusion.horizon)
    schedule = NoiseSchedule(cfg.diffusion.train_steps)
    torch.manual_seed(cfg.seed)
    bundle = train_denoiser(obs, chunks, schedule, epochs=cfg.diffusion.epochs,
                            batch_size=cfg.diffusion.batch_size,
                            lr=cfg.diffusion.learning_rate, seed=cfg.seed)
    tensors = {f"model.{k}": v.detach().numpy() for k, v in bundle.model.state_dict().items()}
    tensors["chunk_norm.lo"] = bundle.chunk_norm.lo
    tensors["chunk_norm.hi"] = bundle.chunk_norm.hi
    tensors["obs_norm.lo"] = bundle.obs_norm.lo
    tensors["obs_norm.hi"] = bundle.obs_norm.hi
    tensors["loss_curve"] = np.asarray(bundle.loss_curve)
    meta = {"config_hash": cfg.config_hash, "seed": cfg.seed, "task": task,
            "obs_dim": bundle.model.obs_dim, "history": cfg.diffusion.history,
            "horizon": cfg.diffusion.horizon, "train_steps": cfg.diffusion.train_steps,
            "final_loss": bundle.loss_curve[-1] if bundle.loss_curve else None}
    save_checkpoint(args.out, tensors, meta)
    print(f"denoiser for {task} -> {args.out} "
          f"(final loss {meta['final_loss']:.4f}, config {cfg.config_hash})")
    return EXIT_OK


def load_diffusion_bundle(path):
    import torch

    from .checkpoint import load_checkpoint
    from .diffusion import ChunkNormalizer, Denoiser, NoiseSchedule, PolicyBundle
    tensors, meta = load_checkpoint(path)
    model = Denoiser(meta["obs_dim"], history=meta["history"], horizon=meta["horizon"])
    sd = {k[len("model."):]: torch.tensor(v) for k, v in tensors.items()
          if k.startswith("model.")}
    model.load_state_dict(sd)
    return PolicyBundle(
        model=model,
        schedule=NoiseSchedule(meta["train_steps"]),
        chunk_norm=ChunkNormalizer(tensors["chunk_norm.lo"].astype(np.float64),
                                   tensors["chunk_norm.hi"].astype(np.float64)),
        obs_norm=ChunkNormalizer(tensors["obs_norm.lo"].astype(np.float64),
                                 tensors["obs_norm.hi"].astype(np.float64)),
        loss_curve=list(tensors.get("loss_curve", np.zeros(0))),
    ), meta


def cmd_rollout(args) -> int:
    from .checkpoint import load_policy
    from .commands import resample_demo
    from .demos import DemoDataset
    from .runtime import RateSchedule, TrajectorySource, run_episode
    from .simworld import GraspObject
    cfg = _load_config(args.config)
    params, _ = load_policy(args.policy)
    task = args.task or cfg.tasks.names[0]
    ds = DemoDataset.load(_demos_path(args.demos, task))
    if len(ds) == 0:
        raise ValueError("demo dataset is empty")
    idx = cfg.seed % len(ds)
    traj = resample_demo(ds.demos[idx], tick_rate_hz=ds.tick_rate_hz)
    # thin to the high-level rate
    stride = max(1, int(round(ds.tick_rate_hz / 2.0)))
    source = TrajectorySource(traj[::stride])
    rates = RateSchedule(cfg.runtime.base_hz, cfg.runtime.leg_divisor,
                         cfg.runtime.arm_divisor, cfg.runtime.high_level_divisor)
    obj = GraspObject(cfg.world.object_width_mm, cfg.world.fragility_n)
    episode_log = run_episode(params, source, seed=cfg.seed,
                              duration_s=cfg.runtime.duration_s,
                              config_hash=cfg.config_hash, rates=rates,
                              grasp_object=obj, ranges=cfg.randomization,
                              weights=cfg.rewards, pushes=cfg.runtime.pushes)
    episode_log.to_csv(args.out)
    status = "aborted" if episode_log.aborted else "ok"
    print(f"rollout {status}: {len(episode_log.records)} ticks -> {args.out}")
    if episode_log.aborted:
        log.error("episode aborted: %s", episode_log.abort_reason)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_eval(args) -> int:
    from .checkpoint import load_policy
    from .demos import DemoDataset
    from .lowlevel import SCENARIOS, evaluate_policy
    cfg = _load_config(args.config)
    if args.scenario not in SCENARIOS:
        raise ValueError(f"scenario must be one of {SCENARIOS}")
    params, _ = load_policy(args.policy)
    dataset = None
    if args.demos:
        task = {"reach": "reach", "twist-cycle": "twist", "gentle-grasp": "grasp"}.get(
            args.scenario)
        if task:
            dataset = DemoDataset.load(_demos_path(args.demos, task))
    metrics = evaluate_policy(params, args.scenario, args.episodes, seed=cfg.seed,
                              dataset=dataset)
    metrics["config_hash"] = cfg.config_hash
    print(json.dumps(metrics, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_plot_data(args) -> int:
    from .runtime import RolloutLog, export_tracking_plot_data
    episode_log = RolloutLog.from_csv(args.log)
    series = export_tracking_plot_data(episode_log)
    names = sorted(series)
    n = max((len(series[k]) for k in names), default=0)
    with open(args.out, "w") as f:
        f.write(f"# config_hash={episode_log.config_hash}\n")
        f.write(",".join(names) + "\n")
        for i in range(n):
            f.write(",".join(repr(float(series[k][i])) if i < len(series[k]) else ""
                             for k in names) + "\n")
    print(f"plot data ({len(names)} series, {n} rows) -> {args.out}")
    return EXIT_OK


def build_parser() -> _Parser:
    p = _Parser(prog="tactiloco",
                description="surrogate-world training tools for tactile "
                            "loco-manipulation policies")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("gen-demos", help="generate scripted demo datasets")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_gen_demos)

    sp = sub.add_parser("train-low", help="train the low-level tracking policy")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", required=True, help="policy checkpoint path")
    sp.add_argument("--stage", type=int, choices=(1, 2), default=1)
    sp.add_argument("--init", help="stage-1 checkpoint (required for stage 2)")
    sp.add_argument("--demos", help="demo directory (required for stage 2)")
    sp.add_argument("--progress", action="store_true")
    sp.set_defaults(func=cmd_train_low)

    sp = sub.add_parser("train-high", help="train the high-level denoiser")
    sp.add_argument("--config", required=True)
    sp.add_argument("--demos", required=True, help="demo directory")
    sp.add_argument("--task", help="task name (default: first configured task)")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_train_high)

    sp = sub.add_parser("rollout", help="run one logged closed-loop episode")
    sp.add_argument("--config", required=True)
    sp.add_argument("--policy", required=True)
    sp.add_argument("--demos", required=True)
    sp.add_argument("--task", help="task name (default: first configured task)")
    sp.add_argument("--out", required=True, help="rollout log CSV path")
    sp.set_defaults(func=cmd_rollout)

    sp = sub.add_parser("eval", help="evaluate a policy on a scenario")
    sp.add_argument("--config", required=True)
    sp.add_argument("--policy", required=True)
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--episodes", type=int, default=5)
    sp.add_argument("--demos", help="demo directory for manipulation scenarios")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("plot-data", help="export normalized tracking series")
    sp.add_argument("--log", required=True, help="rollout log CSV")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_plot_data)
    return p


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    from .checkpoint import CheckpointError
    from .config import ConfigError
    from .diffusion import TrainingDiverged
    from .simworld import WorldFault
    try:
        return args.func(args)
    except (ConfigError, CheckpointError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (TrainingDiverged, WorldFault, RuntimeError) as exc:
        print(f"runtime fault: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
