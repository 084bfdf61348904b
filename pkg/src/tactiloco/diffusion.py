"""High-level tactile-aware policy: FiLM-conditioned temporal U-Net denoiser
over 16-step action chunks, trained with noise prediction on demonstrations
and sampled with deterministic DDIM.

Action chunks have 12 channels per step: EE pose (7, relative convention),
gripper width (1), tactile target (4, normalized descriptor space).
Observations stack a short history (default 2) of
(visual feature, pose, width, tactile) vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn

CHUNK_CHANNELS = 12
DEFAULT_HORIZON = 16
DEFAULT_EXECUTE_K = 8
DEFAULT_HISTORY = 2
DEFAULT_VISUAL_DIM = 32
DEFAULT_TRAIN_STEPS = 100
DEFAULT_DDIM_STEPS = 16

OBS_LOW_DIM = 12      # pose 7 + width 1 + tactile 4


# --------------------------------------------------------------------------
# noise schedule

@dataclass
class NoiseSchedule:
    """Cumulative alpha-bar products of a beta schedule."""

    n_steps: int = DEFAULT_TRAIN_STEPS
    kind: str = "linear"             # or "cosine"
    alpha_bar: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.n_steps < 2:
            raise ValueError("schedule needs at least 2 steps")
        if self.kind == "linear":
            betas = np.linspace(1e-4, 0.03, self.n_steps)
            alphas = 1.0 - betas
            self.alpha_bar = np.cumprod(alphas)
        elif self.kind == "cosine":
            s = 0.008
            t = np.arange(self.n_steps + 1) / self.n_steps
            f = np.cos((t + s) / (1 + s) * math.pi / 2) ** 2
            ab = f[1:] / f[0]
            self.alpha_bar = np.clip(ab, 1e-5, 0.9999)
        else:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not np.all(np.diff(self.alpha_bar) < 0):
            raise AssertionError("alpha_bar must be strictly decreasing")


# --------------------------------------------------------------------------
# normalization

@dataclass
class ChunkNormalizer:
    """Per-channel affine map of chunk/observation channels into [-1, 1]."""

    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def fit(cls, data: np.ndarray) -> "ChunkNormalizer":
        """data: (..., channels); degenerate channels get unit span."""
        flat = data.reshape(-1, data.shape[-1])
        lo = flat.min(axis=0)
        hi = flat.max(axis=0)
        span = hi - lo
        lo = np.where(span < 1e-8, lo - 0.5, lo)
        hi = np.where(span < 1e-8, hi + 0.5, hi)
        return cls(lo, hi)

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return 2.0 * (x - self.lo) / (self.hi - self.lo) - 1.0

    def denormalize(self, x: np.ndarray) -> np.ndarray:
        return self.lo + (x + 1.0) * (self.hi - self.lo) / 2.0


# --------------------------------------------------------------------------
# visual feature stand-in

class VisualFeatureProvider:
    """Fixed random projection of ground-truth scene state to a feature vector.

    Stands in for a learned image encoder; any provider of a fixed-dimension
    vector can replace it.
    """

    def __init__(self, state_dim: int, feature_dim: int = DEFAULT_VISUAL_DIM, seed: int = 7):
        rng = np.random.default_rng(seed)
        self.matrix = rng.normal(0.0, 1.0 / math.sqrt(state_dim), (feature_dim, state_dim))
        self.feature_dim = feature_dim

    def __call__(self, scene_state: np.ndarray) -> np.ndarray:
        return np.tanh(self.matrix @ np.asarray(scene_state, dtype=np.float64))


# --------------------------------------------------------------------------
# denoiser

class FiLM(nn.Module):
    """Per-channel scale/shift from the conditioning vector."""

    def __init__(self, cond_dim: int, channels: int):
        super().__init__()
        self.proj = nn.Linear(cond_dim, 2 * channels)

    def forward(self, x: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        scale, shift = self.proj(cond).chunk(2, dim=-1)
        return x * (1.0 + scale.unsqueeze(-1)) + shift.unsqueeze(-1)


def _timestep_embedding(t: torch.Tensor, dim: int) -> torch.Tensor:
    half = dim // 2
    freqs = torch.exp(-math.log(1000.0) * torch.arange(half, dtype=torch.float32) / half)
    ang = t.float().unsqueeze(-1) * freqs
    return torch.cat([torch.sin(ang), torch.cos(ang)], dim=-1)


class Denoiser(nn.Module):
    """Temporal conv U-Net over (12 channels x horizon) chunks.

    One down/up level (horizon 16 -> 8 -> 16) with a skip connection;
    FiLM after every conv, conditioned on observation history + diffusion
    step embedding.
    """

    def __init__(
        self,
        obs_dim: int,
        history: int = DEFAULT_HISTORY,
        horizon: int = DEFAULT_HORIZON,
        widths: tuple[int, int] = (64, 128),
        temb_dim: int = 32,
    ):
        super().__init__()
        if horizon % 2 != 0:
            raise ValueError("horizon must be even")
        self.obs_dim = obs_dim
        self.history = history
        self.horizon = horizon
        cond_dim = obs_dim * history + temb_dim
        self.temb_dim = temb_dim
        w0, w1 = widths

        self.cond_mlp = nn.Sequential(nn.Linear(cond_dim, 64), nn.SiLU(), nn.Linear(64, 64))
        self.in_conv = nn.Conv1d(CHUNK_CHANNELS, w0, 5, padding=2)
        self.film_in = FiLM(64, w0)
        self.down = nn.Conv1d(w0, w1, 3, stride=2, padding=1)
        self.film_down = FiLM(64, w1)
        self.mid = nn.Conv1d(w1, w1, 3, padding=1)
        self.film_mid = FiLM(64, w1)
        self.up = nn.ConvTranspose1d(w1, w0, 4, stride=2, padding=1)
        self.film_up = FiLM(64, w0)
        self.out_conv = nn.Conv1d(2 * w0, CHUNK_CHANNELS, 3, padding=1)
        self.act = nn.SiLU()

    def forward(self, chunk: torch.Tensor, cond: torch.Tensor, t: torch.Tensor) -> torch.Tensor:
        """chunk: (b, 12, horizon); cond: (b, history*obs_dim); t: (b,) int steps."""
        temb = _timestep_embedding(t, self.temb_dim)
        c = self.cond_mlp(torch.cat([cond, temb], dim=-1))
        h0 = self.act(self.film_in(self.in_conv(chunk), c))
        h1 = self.act(self.film_down(self.down(h0), c))
        h1 = self.act(self.film_mid(self.mid(h1), c))
        h2 = self.act(self.film_up(self.up(h1), c))
        return self.out_conv(torch.cat([h2, h0], dim=1))


# --------------------------------------------------------------------------
# training

@dataclass
class PolicyBundle:
    """Trained denoiser plus everything needed to sample from it."""

    model: Denoiser
    schedule: NoiseSchedule
    chunk_norm: ChunkNormalizer
    obs_norm: ChunkNormalizer
    loss_curve: list[float] = field(default_factory=list)


class TrainingDiverged(RuntimeError):
    pass


def train_denoiser(
    obs_histories: np.ndarray,
    chunks: np.ndarray,
    schedule: NoiseSchedule | None = None,
    epochs: int = 60,
    batch_size: int = 64,
    lr: float = 1e-3,
    seed: int = 0,
    model: Denoiser | None = None,
) -> PolicyBundle:
    """Noise-prediction training.

    obs_histories: (n, history, obs_dim) raw observations.
    chunks: (n, horizon, 12) raw action chunks.
    """
    if len(obs_histories) == 0:
        raise ValueError("training dataset is empty")
    if len(obs_histories) != len(chunks):
        raise ValueError("observation/chunk count mismatch")
    schedule = schedule or NoiseSchedule()
    torch.manual_seed(seed)

    chunk_norm = ChunkNormalizer.fit(chunks)
    obs_norm = ChunkNormalizer.fit(obs_histories)
    n, history, obs_dim = obs_histories.shape
    horizon = chunks.shape[1]

    x = torch.tensor(chunk_norm.normalize(chunks), dtype=torch.float32).permute(0, 2, 1)  # (n, 12, H)
    cond = torch.tensor(obs_norm.normalize(obs_histories), dtype=torch.float32).reshape(n, -1)
    ab = torch.tensor(schedule.alpha_bar, dtype=torch.float32)

    if model is None:
        model = Denoiser(obs_dim=obs_dim, history=history, horizon=horizon)
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    gen = torch.Generator().manual_seed(seed)

    curve = []
    for epoch in range(epochs):
        perm = torch.randperm(n, generator=gen)
        total, count = 0.0, 0
        for start in range(0, n, batch_size):
            idx = perm[start:start + batch_size]
            xb, cb = x[idx], cond[idx]
            t = torch.randint(0, schedule.n_steps, (len(idx),), generator=gen)
            eps = torch.randn(xb.shape, generator=gen)
            a = ab[t].view(-1, 1, 1)
            noisy = torch.sqrt(a) * xb + torch.sqrt(1.0 - a) * eps
            pred = model(noisy, cb, t)
            loss = ((pred - eps) ** 2).mean()
            if not torch.isfinite(loss):
                raise TrainingDiverged(f"loss diverged at epoch {epoch}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += float(loss.detach()) * len(idx)
            count += len(idx)
        curve.append(total / count)
    return PolicyBundle(model, schedule, chunk_norm, obs_norm, curve)


# --------------------------------------------------------------------------
# sampling

def ddim_sample(
    bundle: PolicyBundle,
    obs_history: np.ndarray,
    n_steps: int = DEFAULT_DDIM_STEPS,
    seed: int = 0,
) -> np.ndarray:
    """Deterministic DDIM (eta = 0).  Returns a denormalized (horizon, 12) chunk."""
    schedule = bundle.schedule
    if n_steps <= 0:
        raise ValueError("n_steps must be positive")
    if n_steps > schedule.n_steps:
        raise ValueError("n_steps cannot exceed the training schedule length")
    model = bundle.model
    cond = torch.tensor(
        bundle.obs_norm.normalize(np.asarray(obs_history)), dtype=torch.float32
    ).reshape(1, -1)

    steps = np.linspace(schedule.n_steps - 1, 0, n_steps).round().astype(int)
    gen = torch.Generator().manual_seed(seed)
    # the recursion itself runs in float64 (the model is queried in float32):
    # repeated scalar rescales would otherwise accumulate float32 rounding
    x = torch.randn((1, CHUNK_CHANNELS, model.horizon), generator=gen).double()
    ab = schedule.alpha_bar
    with torch.no_grad():
        for i, t in enumerate(steps):
            eps = model(x.float(), cond, torch.tensor([t])).double()
            a_t = float(ab[t])
            x0 = (x - math.sqrt(1.0 - a_t) * eps) / math.sqrt(a_t)
            if i + 1 < len(steps):
                a_prev = float(ab[steps[i + 1]])
                x = math.sqrt(a_prev) * x0 + math.sqrt(1.0 - a_prev) * eps
            else:
                x = x0
    chunk = x.squeeze(0).permute(1, 0).numpy()
    return bundle.chunk_norm.denormalize(chunk)


def ddim_zero_noise_reference(schedule: NoiseSchedule, x_init: np.ndarray, n_steps: int) -> np.ndarray:
    """Closed-form DDIM recursion for a denoiser that predicts zero noise.

    Independent oracle: with eps_hat = 0, each update is a pure rescale, so
    the final output is x_init * prod over steps of sqrt(a_prev/a_t), ending
    at 1/sqrt(a_last).
    """
    steps = np.linspace(schedule.n_steps - 1, 0, n_steps).round().astype(int)
    scale = 1.0
    for i, t in enumerate(steps):
        a_t = schedule.alpha_bar[t]
        a_prev = schedule.alpha_bar[steps[i + 1]] if i + 1 < len(steps) else 1.0
        scale *= math.sqrt(a_prev / a_t)
    return x_init * scale


# --------------------------------------------------------------------------
# receding-horizon execution

def receding_horizon_execute(
    bundle: PolicyBundle,
    env,
    n_steps: int,
    execute_k: int = DEFAULT_EXECUTE_K,
    ddim_steps: int = DEFAULT_DDIM_STEPS,
    seed: int = 0,
) -> dict:
    """Closed-loop chunk execution against an environment adapter.

    ``env`` must provide ``observe() -> (history, obs_dim) array`` and
    ``apply(step12) -> None`` advancing one high-level step.  Every
    ``execute_k`` steps a fresh chunk is sampled from the latest
    observation; the first ``execute_k`` steps of it are executed.
    Returns a log dict with commanded steps and replan count.
    """
    if execute_k < 1 or execute_k > bundle.model.horizon:
        raise ValueError("execute_k must lie in [1, horizon]")
    commanded = []
    replans = 0
    aborted = False
    chunk = None
    cursor = 0
    for step in range(n_steps):
        if chunk is None or cursor >= execute_k:
            try:
                obs = env.observe()
            except Exception:
                aborted = True
                break
            chunk = ddim_sample(bundle, obs, n_steps=ddim_steps, seed=seed + replans)
            cursor = 0
            replans += 1
        cmd = chunk[cursor]
        cursor += 1
        commanded.append(cmd.copy())
        try:
            env.apply(cmd)
        except Exception:
            aborted = True
            break
    return {
        "commanded": np.array(commanded) if commanded else np.zeros((0, CHUNK_CHANNELS)),
        "replans": replans,
        "aborted": aborted,
    }
