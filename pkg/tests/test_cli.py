import json

import numpy as np
import pytest
import yaml

from tactiloco import cli
from tactiloco.checkpoint import load_policy, save_policy
from tactiloco.lowlevel import STAGE1_OBS_DIM, random_policy_params


TINY_CONFIG = {
    "seed": 3,
    "ppo": {
        "n_envs": 2, "rollout_ticks": 8, "iterations": 1,
        "minibatch_size": 16, "epochs_per_batch": 1,
    },
    "diffusion": {"train_steps": 10, "epochs": 2, "ddim_steps": 4},
    "tasks": {"names": ["reach"], "demos_per_task": 2},
    "runtime": {"duration_s": 1.0},
}


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "run.yaml"
    p.write_text(yaml.safe_dump(TINY_CONFIG))
    return str(p)


def test_no_args_is_usage_error():
    assert cli.main([]) == cli.EXIT_USAGE


def test_unknown_subcommand_is_usage_error():
    assert cli.main(["launch-rocket"]) == cli.EXIT_USAGE


def test_missing_config_file_is_validation_error(tmp_path):
    rc = cli.main(["gen-demos", "--config", str(tmp_path / "nope.yaml"),
                   "--out", str(tmp_path / "d")])
    assert rc == cli.EXIT_VALIDATION


def test_bad_config_is_validation_error(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text(yaml.safe_dump({"ppo": {"clip_ratio": 5.0}}))
    rc = cli.main(["gen-demos", "--config", str(p), "--out", str(tmp_path / "d")])
    assert rc == cli.EXIT_VALIDATION


def test_gen_demos(cfg_path, tmp_path, capsys):
    out = tmp_path / "demos"
    assert cli.main(["gen-demos", "--config", cfg_path, "--out", str(out)]) == cli.EXIT_OK
    assert (out / "reach.demos").exists()
    assert "reach: 2 demos" in capsys.readouterr().out


def test_train_low_stage2_requires_init_and_demos(cfg_path, tmp_path):
    rc = cli.main(["train-low", "--config", cfg_path, "--stage", "2",
                   "--out", str(tmp_path / "p.ckpt")])
    assert rc == cli.EXIT_VALIDATION


def test_eval_rejects_unknown_scenario(cfg_path, tmp_path):
    pol = tmp_path / "p.ckpt"
    save_policy(pol, random_policy_params(STAGE1_OBS_DIM), {})
    rc = cli.main(["eval", "--config", cfg_path, "--policy", str(pol),
                   "--scenario", "parkour", "--episodes", "1"])
    assert rc == cli.EXIT_VALIDATION


def test_eval_locomotion_outputs_json(cfg_path, tmp_path, capsys):
    pol = tmp_path / "p.ckpt"
    save_policy(pol, random_policy_params(STAGE1_OBS_DIM), {})
    rc = cli.main(["eval", "--config", cfg_path, "--policy", str(pol),
                   "--scenario", "locomotion", "--episodes", "1"])
    assert rc == cli.EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["episodes"] == 1
    assert "kernel_vx_mean" in out and "config_hash" in out


def test_rollout_and_plot_data(cfg_path, tmp_path, capsys):
    demos = tmp_path / "demos"
    assert cli.main(["gen-demos", "--config", cfg_path, "--out", str(demos)]) == cli.EXIT_OK
    pol = tmp_path / "p.ckpt"
    save_policy(pol, random_policy_params(STAGE1_OBS_DIM), {})
    log_csv = tmp_path / "ep.csv"
    rc = cli.main(["rollout", "--config", cfg_path, "--policy", str(pol),
                   "--demos", str(demos), "--out", str(log_csv)])
    assert rc == cli.EXIT_OK
    assert log_csv.exists()

    plot_csv = tmp_path / "plot.csv"
    rc = cli.main(["plot-data", "--log", str(log_csv), "--out", str(plot_csv)])
    assert rc == cli.EXIT_OK
    header = plot_csv.read_text().splitlines()
    assert header[0].startswith("# config_hash=")
    assert "distance" in header[1].split(",")


def test_rollout_is_deterministic(cfg_path, tmp_path):
    demos = tmp_path / "demos"
    cli.main(["gen-demos", "--config", cfg_path, "--out", str(demos)])
    pol = tmp_path / "p.ckpt"
    save_policy(pol, random_policy_params(STAGE1_OBS_DIM), {})
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (out1, out2):
        assert cli.main(["rollout", "--config", cfg_path, "--policy", str(pol),
                         "--demos", str(demos), "--out", str(out)]) == cli.EXIT_OK
    assert out1.read_bytes() == out2.read_bytes()


def test_train_low_stage1_tiny(cfg_path, tmp_path, capsys):
    out = tmp_path / "p1.ckpt"
    rc = cli.main(["train-low", "--config", cfg_path, "--out", str(out)])
    assert rc == cli.EXIT_OK
    params, meta = load_policy(out)
    assert meta["stage"] == 1
    assert int(params["__obs_dim__"][0]) == STAGE1_OBS_DIM


def test_train_high_tiny(cfg_path, tmp_path, capsys):
    demos = tmp_path / "demos"
    cli.main(["gen-demos", "--config", cfg_path, "--out", str(demos)])
    out = tmp_path / "high.ckpt"
    rc = cli.main(["train-high", "--config", cfg_path, "--demos", str(demos),
                   "--out", str(out)])
    assert rc == cli.EXIT_OK
    bundle, meta = cli.load_diffusion_bundle(out)
    assert meta["task"] == "reach"
    assert bundle.model.horizon == 16
    from tactiloco.diffusion import ddim_sample
    obs = np.zeros((meta["history"], meta["obs_dim"]))
    chunk = ddim_sample(bundle, obs, n_steps=4, seed=0)
    assert chunk.shape == (16, 12)
