"""Conditional flow-matching action policy.

The velocity field is a dense net over (noisy chunk, flow time, fused fast
state, intent embedding). Training regresses the straight-line transport
direction x1 - x0 along the optimal-transport path psi_t = (1-t) x0 + t x1,
with flow times biased toward the source end so the field is sharpest where
single-step inference queries it (t = 0). The intent encoder trains jointly:
its gradients arrive only through this loss.

Actions live in a normalized box for flow purposes: planar displacement is
divided by the per-step budget, grip is already in [-1, 1]. Emitted chunks are
mapped back to executable units.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .dataset import Batch, ChunkingConfig, batch_iter
from .errors import ConfigurationError, TrainingError
from .intent import EMBED_DIM_DEFAULT, TASK_TAGS
from .motion import MOTION_DIM_DEFAULT, MotionConfig, MotionPredictor
from .nets import (MlpNetwork, adam_init, adam_step, load_mlp_text,
                   mlp_backward, mlp_fingerprint, mlp_forward, mlp_init,
                   save_mlp_text)
from .sampling import (beta_time_from_uniform, sample_gaussian_chunk, spawn_rng)
from .util import config_hash, ensure_dir, read_json, write_json

Array = np.ndarray


# --- probability path -------------------------------------------------------

@dataclass
class FlowSample:
    x0: Array   # source noise (horizon, action_dim)
    x1: Array   # normalized action chunk
    t: float
    x_t: Array  # (1-t) x0 + t x1
    u: Array    # transport target x1 - x0


def make_flow_sample(rng: np.random.Generator, x1: Array, alpha: float) -> FlowSample:
    """Draw (x0, t) and place the sample on the straight path."""
    x1 = np.asarray(x1, dtype=np.float64)
    x0 = sample_gaussian_chunk(rng, x1.shape[0], x1.shape[1])
    u_draw = rng.random()
    t = float(beta_time_from_uniform(u_draw, alpha))
    return flow_sample_at(x0, x1, t)


def flow_sample_at(x0: Array, x1: Array, t: float) -> FlowSample:
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    if x0.shape != x1.shape:
        raise ConfigurationError(f"x0/x1 shapes differ: {x0.shape} vs {x1.shape}")
    x_t = (1.0 - t) * x0 + t * x1
    return FlowSample(x0=x0, x1=x1, t=t, x_t=x_t, u=x1 - x0)


# --- velocity field ----------------------------------------------------------

def vf_input_dim(chunking: ChunkingConfig, fused_dim: int, embed_dim: int) -> int:
    return chunking.horizon * chunking.action_dim + 1 + fused_dim + embed_dim


def vf_input(x_t: Array, t: float, fused: Array, embed: Array) -> Array:
    return np.concatenate([np.asarray(x_t).ravel(), [float(t)],
                           np.asarray(fused), np.asarray(embed)])


def vf_forward(net: MlpNetwork, x_t: Array, t: float, fused: Array, embed: Array) -> Array:
    """Predicted transport direction, reshaped to (horizon, action_dim)."""
    x_t = np.asarray(x_t, dtype=np.float64)
    out = mlp_forward(net, vf_input(x_t, t, fused, embed))
    return out.reshape(x_t.shape)


def cfm_loss_value(v_pred: Array, u: Array, weights: Array) -> float:
    """Horizon-weighted squared transport error.

    v_pred, u: (horizon, action_dim) or (batch, horizon, action_dim);
    weights: (horizon,). Per-step weights multiply that step's squared-error
    norm; batches average.
    """
    v = np.asarray(v_pred, dtype=np.float64)
    t = np.asarray(u, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if v.shape != t.shape:
        raise ConfigurationError(f"shape mismatch {v.shape} vs {t.shape}")
    if v.ndim == 2:
        v = v[None]
        t = t[None]
    if w.shape != (v.shape[1],):
        raise ConfigurationError(f"weights shape {w.shape} does not match horizon {v.shape[1]}")
    per = ((v - t) ** 2).sum(axis=2)  # (B, horizon)
    return float((per * w[None, :]).sum(axis=1).mean())


# --- inference ---------------------------------------------------------------

def normalize_actions(actions: Array, action_scale: float) -> Array:
    out = np.asarray(actions, dtype=np.float64).copy()
    out[..., 0] /= action_scale
    out[..., 1] /= action_scale
    return out


def decode_chunk(chunk_norm: Array, action_scale: float) -> Array:
    """Map a normalized chunk back to executable actions."""
    out = np.asarray(chunk_norm, dtype=np.float64).copy()
    out[..., 0] *= action_scale
    out[..., 1] *= action_scale
    out[..., 2] = np.clip(out[..., 2], -1.0, 1.0)
    return out


def euler_single_step(net: MlpNetwork, rng: np.random.Generator, fused: Array,
                      embed: Array, chunking: ChunkingConfig,
                      action_scale: float) -> Array:
    """One-step generation: fresh noise plus the field queried at t = 0."""
    x0 = sample_gaussian_chunk(rng, chunking.horizon, chunking.action_dim)
    v = vf_forward(net, x0, 0.0, fused, embed)
    return decode_chunk(x0 + v, action_scale)


def multi_step_solve(net: MlpNetwork, rng: np.random.Generator, fused: Array,
                     embed: Array, chunking: ChunkingConfig, action_scale: float,
                     n_solve_steps: int) -> Array:
    """Forward-Euler integration of the field with n_solve_steps slices.

    n_solve_steps = 1 reduces exactly to euler_single_step (same noise draw,
    same arithmetic).
    """
    if n_solve_steps <= 0:
        raise ConfigurationError(f"n_solve_steps must be positive, got {n_solve_steps}")
    x = sample_gaussian_chunk(rng, chunking.horizon, chunking.action_dim)
    h = 1.0 / n_solve_steps
    for j in range(n_solve_steps):
        v = vf_forward(net, x, j * h, fused, embed)
        x = x + h * v
    return decode_chunk(x, action_scale)


# --- training ----------------------------------------------------------------

@dataclass(frozen=True)
class PolicyTrainConfig:
    alpha: float = 5.0
    stage_sampling: str = "uniform"   # "zero" trains synchronous conditioning
    motion_on: bool = True
    hidden: tuple[int, ...] = (128, 128)
    embed_dim: int = EMBED_DIM_DEFAULT
    intent_hidden: tuple[int, ...] = (64,)
    lr: float = 1e-3
    final_lr_frac: float = 0.1
    batch_size: int = 128
    steps: int = 8000
    seed: int = 0
    log_every: int = 200

    def __post_init__(self):
        if self.alpha <= 0:
            raise ConfigurationError("alpha must be positive")
        if self.steps <= 0 or self.batch_size <= 0:
            raise ConfigurationError("steps and batch_size must be positive")


@dataclass
class PolicyBundle:
    policy: MlpNetwork
    intent: MlpNetwork
    chunking: ChunkingConfig
    action_scale: float
    alpha: float
    motion_on: bool
    motion_dim: int
    grid_resolution: int
    train_hash: str
    motion_fingerprint: str = ""

    @property
    def fused_dim(self) -> int:
        from .dataset import PROPRIO_DIM
        return PROPRIO_DIM + self.motion_dim

    def fingerprint(self) -> str:
        return mlp_fingerprint(self.policy) + mlp_fingerprint(self.intent)


def _fused_from_batch(batch: Batch, motion: MotionPredictor | None,
                      motion_on: bool, motion_dim: int, want_cache: bool = False):
    gate = (1.0 - batch.contact.astype(np.float64))[:, None]
    if motion_on and motion is not None:
        m_raw, cache = (mlp_forward(motion.trunk, batch.diffs, want_cache=True)
                        if want_cache else (mlp_forward(motion.trunk, batch.diffs), None))
        m = m_raw * gate
    else:
        m_raw, cache = np.zeros((len(batch), motion_dim)), None
        m = m_raw
    return np.concatenate([batch.s_prop, m], axis=1), gate, cache


def composed_cfm_loss_and_grads(policy: MlpNetwork, intent_net: MlpNetwork,
                                motion: MotionPredictor | None, batch: Batch,
                                x0: Array, t: Array, chunking: ChunkingConfig,
                                action_scale: float, motion_on: bool = True,
                                want_motion_grads: bool = False):
    """Loss and exact gradients for one fixed batch and fixed (x0, t) draws.

    Gradients flow into the velocity field, the intent encoder, and (when
    requested) the motion trunk through the gated fused state.
    """
    b = len(batch)
    horizon, adim = chunking.horizon, chunking.action_dim
    w = chunking.weights()
    x1 = normalize_actions(batch.actions, action_scale)
    tt = np.asarray(t, dtype=np.float64)[:, None, None]
    x_t = (1.0 - tt) * x0 + tt * x1
    u = x1 - x0

    motion_dim = motion.cfg.motion_dim if motion is not None else MOTION_DIM_DEFAULT
    fused, gate, trunk_cache = _fused_from_batch(batch, motion, motion_on,
                                                 motion_dim, want_cache=want_motion_grads)
    embed, intent_cache = mlp_forward(intent_net, batch.macro_in, want_cache=True)
    vin = np.concatenate([x_t.reshape(b, horizon * adim),
                          np.asarray(t, dtype=np.float64)[:, None], fused, embed], axis=1)
    v, policy_cache = mlp_forward(policy, vin, want_cache=True)
    resid = v.reshape(b, horizon, adim) - u
    loss = float(((resid ** 2).sum(axis=2) * w[None, :]).sum(axis=1).mean())

    gout = (2.0 / b) * (w[None, :, None] * resid)
    policy_grads, gin = mlp_backward(policy, policy_cache, gout.reshape(b, horizon * adim))
    fused_off = horizon * adim + 1
    embed_off = fused_off + fused.shape[1]
    g_embed = gin[:, embed_off:]
    intent_grads, _ = mlp_backward(intent_net, intent_cache, g_embed)
    motion_grads = None
    if want_motion_grads and motion_on and motion is not None:
        from .dataset import PROPRIO_DIM
        g_m = gin[:, fused_off + PROPRIO_DIM: embed_off] * gate
        motion_grads, _ = mlp_backward(motion.trunk, trunk_cache, g_m)
    return loss, policy_grads, intent_grads, motion_grads


def train_policy(episodes, motion: MotionPredictor | None,
                 chunking: ChunkingConfig, cfg: PolicyTrainConfig):
    """Joint training of the intent encoder and velocity field.

    The motion predictor is consumed frozen; its parameters are never updated
    here. Returns (PolicyBundle, telemetry) with a per-log-interval loss curve.
    """
    if not episodes:
        raise ConfigurationError("no training episodes")
    env_cfg = episodes[0].cfg
    action_scale = env_cfg.max_step_displacement
    g2 = env_cfg.grid_resolution ** 2
    mcfg = motion.cfg if motion is not None else MotionConfig(grid_resolution=env_cfg.grid_resolution)
    motion_dim = mcfg.motion_dim
    fused_dim = 4 + motion_dim
    frozen_fp = motion.fingerprint() if motion is not None else ""

    rng_init = spawn_rng(cfg.seed, 10)
    intent_net = mlp_init([g2 + len(TASK_TAGS), *cfg.intent_hidden, cfg.embed_dim], rng_init)
    policy = mlp_init([vf_input_dim(chunking, fused_dim, cfg.embed_dim),
                       *cfg.hidden, chunking.horizon * chunking.action_dim],
                      rng_init, out_scale=0.0)
    opt_p = adam_init(policy, lr=cfg.lr)
    opt_i = adam_init(intent_net, lr=cfg.lr)

    batches = batch_iter(episodes, chunking, mcfg, spawn_rng(cfg.seed, 11),
                         cfg.batch_size, stage_sampling=cfg.stage_sampling)
    noise_rng = spawn_rng(cfg.seed, 12)

    curve = []
    running = 0.0
    for step in range(cfg.steps):
        frac = step / max(cfg.steps - 1, 1)
        lr_now = cfg.lr * (1.0 - frac * (1.0 - cfg.final_lr_frac))
        opt_p.lr = lr_now
        opt_i.lr = lr_now

        batch = next(batches)
        x0 = noise_rng.standard_normal((cfg.batch_size, chunking.horizon, chunking.action_dim))
        t = beta_time_from_uniform(noise_rng.random(cfg.batch_size), cfg.alpha)
        loss, g_policy, g_intent, _ = composed_cfm_loss_and_grads(
            policy, intent_net, motion, batch, x0, t, chunking, action_scale,
            motion_on=cfg.motion_on, want_motion_grads=False)
        if not np.isfinite(loss):
            raise TrainingError(
                f"policy loss diverged at step {step}: loss={loss}, lr={lr_now:.2e}, "
                f"batch anchors {batch.anchors[:4].tolist()}")
        adam_step(policy, g_policy, opt_p)
        adam_step(intent_net, g_intent, opt_i)
        running += loss
        if (step + 1) % cfg.log_every == 0 or step == cfg.steps - 1:
            denom = cfg.log_every if (step + 1) % cfg.log_every == 0 else (step % cfg.log_every) + 1
            curve.append((step + 1, running / denom))
            running = 0.0

    if motion is not None and motion.fingerprint() != frozen_fp:
        raise TrainingError("motion predictor changed during policy training")

    train_hash = config_hash({"chunking": chunking, "train": cfg,
                              "env": env_cfg, "n_episodes": len(episodes)})
    bundle = PolicyBundle(
        policy=policy, intent=intent_net, chunking=chunking,
        action_scale=action_scale, alpha=cfg.alpha, motion_on=cfg.motion_on,
        motion_dim=motion_dim, grid_resolution=env_cfg.grid_resolution,
        train_hash=train_hash, motion_fingerprint=frozen_fp)
    telemetry = {"loss_curve": curve, "final_loss": curve[-1][1] if curve else None}
    return bundle, telemetry


# --- checkpoint bundle -------------------------------------------------------

def save_policy_bundle(bundle: PolicyBundle, out_dir: str) -> None:
    ensure_dir(out_dir)
    save_mlp_text(bundle.policy, os.path.join(out_dir, "policy.txt"))
    save_mlp_text(bundle.intent, os.path.join(out_dir, "intent.txt"))
    write_json(os.path.join(out_dir, "bundle.json"), {
        "format": 1,
        "chunking": bundle.chunking,
        "action_scale": bundle.action_scale,
        "alpha": bundle.alpha,
        "motion_on": bundle.motion_on,
        "motion_dim": bundle.motion_dim,
        "grid_resolution": bundle.grid_resolution,
        "train_hash": bundle.train_hash,
        "motion_fingerprint": bundle.motion_fingerprint,
        "fingerprint": bundle.fingerprint(),
    })


def load_policy_bundle(path: str) -> PolicyBundle:
    meta = read_json(os.path.join(path, "bundle.json"))
    if meta.get("format") != 1:
        raise ConfigurationError(f"{path}: unsupported bundle format")
    ck = dict(meta["chunking"])
    chunking = ChunkingConfig(**ck)
    bundle = PolicyBundle(
        policy=load_mlp_text(os.path.join(path, "policy.txt")),
        intent=load_mlp_text(os.path.join(path, "intent.txt")),
        chunking=chunking,
        action_scale=float(meta["action_scale"]),
        alpha=float(meta["alpha"]),
        motion_on=bool(meta["motion_on"]),
        motion_dim=int(meta["motion_dim"]),
        grid_resolution=int(meta["grid_resolution"]),
        train_hash=meta["train_hash"],
        motion_fingerprint=meta.get("motion_fingerprint", ""),
    )
    if bundle.fingerprint() != meta["fingerprint"]:
        raise ConfigurationError(f"{path}: bundle fingerprint mismatch")
    return bundle
