"""High-rate motion cue: frame differencing, a small bottleneck net, fusion.

The predictor consumes the difference between the current grid frame and the
frame from a fixed lag earlier, squeezes it through a low-dimensional
bottleneck, and is pretrained to regress target kinematics from that cue via
an auxiliary head. After pretraining it is frozen; the policy consumes only
the bottleneck vector, gated to exactly zero while the object is held (its
motion is then just the arm's own).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .env import MAX_CELL_INTENSITY
from .errors import ConfigurationError, TrainingError
from .nets import (AdamState, MlpNetwork, adam_init, adam_step, load_mlp_text,
                   mlp_backward, mlp_fingerprint, mlp_forward, mlp_init,
                   save_mlp_text)
from .sampling import spawn_rng
from .util import config_hash, ensure_dir, read_json, write_json

Array = np.ndarray

K_LAG = 4
MOTION_DIM_DEFAULT = 8
AUX_DIM = 6  # (p_now, v_now, p_future), 2 components each


def diff_frames(now: Array, past: Array) -> Array:
    """Flattened frame difference scaled into [-1, 1].

    Scaling divides by the largest possible cell value (all three markers
    stacked), so any legal pair of frames maps inside the unit box.
    """
    now = np.asarray(now, dtype=np.float64)
    past = np.asarray(past, dtype=np.float64)
    if now.shape != past.shape:
        raise ConfigurationError(f"frame shapes differ: {now.shape} vs {past.shape}")
    return ((now - past) / MAX_CELL_INTENSITY).ravel()


def motion_forward(trunk: MlpNetwork, diff: Array) -> Array:
    """Bottleneck motion vector for one flattened frame difference."""
    d = np.asarray(diff, dtype=np.float64)
    if d.ndim == 1 and d.shape[0] != trunk.layer_dims[0]:
        raise ConfigurationError(
            f"diff dim {d.shape[0]} does not match trunk input {trunk.layer_dims[0]}")
    return mlp_forward(trunk, d)


def motion_aux_loss(pred: Array, target: Array, lambdas=(1.0, 1.0, 1.0)) -> float:
    """Weighted squared-error over (position now, velocity now, position later).

    pred and target are 6-vectors laid out as [p_now, v_now, p_future]; each
    2-component block gets its own lambda. Batched inputs average over rows.
    """
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape or p.shape[-1] != AUX_DIM:
        raise ConfigurationError(f"aux shapes must match and end in {AUX_DIM}, got {p.shape}, {t.shape}")
    if p.ndim == 1:
        p = p[None, :]
        t = t[None, :]
    lam = np.repeat(np.asarray(lambdas, dtype=np.float64), 2)
    sq = (p - t) ** 2
    return float((sq * lam).sum(axis=1).mean())


def fuse_state(proprio: Array, motion_vec: Array, contact: int) -> Array:
    """Concatenate proprioception with the contact-gated motion block.

    contact = 1 multiplies the motion block by exactly 0.0, so fused states in
    contact carry strictly zero motion signal (no epsilon leakage).
    """
    if contact not in (0, 1):
        raise ConfigurationError(f"contact must be 0 or 1, got {contact!r}")
    gate = 1.0 - float(contact)
    m = np.asarray(motion_vec, dtype=np.float64)
    gated = m * gate if contact == 0 else np.zeros_like(m)
    return np.concatenate([np.asarray(proprio, dtype=np.float64), gated])


@dataclass(frozen=True)
class MotionConfig:
    grid_resolution: int = 16
    motion_dim: int = MOTION_DIM_DEFAULT
    trunk_hidden: tuple[int, ...] = (64,)
    head_hidden: tuple[int, ...] = (32,)
    k_lag: int = K_LAG
    lambdas: tuple[float, float, float] = (1.0, 1.0, 1.0)
    aux_source: str = "target"  # or "effector"
    lr: float = 1e-3
    final_lr_frac: float = 0.1  # linear decay endpoint as a fraction of lr
    batch_size: int = 128
    epochs: int = 10
    steps_per_epoch: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.aux_source not in ("target", "effector"):
            raise ConfigurationError(f"aux_source must be target|effector, got {self.aux_source!r}")
        if self.motion_dim <= 0 or self.k_lag <= 0:
            raise ConfigurationError("motion_dim and k_lag must be positive")

    def trunk_dims(self) -> list[int]:
        return [self.grid_resolution ** 2, *self.trunk_hidden, self.motion_dim]

    def head_dims(self) -> list[int]:
        return [self.motion_dim, *self.head_hidden, AUX_DIM]


@dataclass
class MotionPredictor:
    trunk: MlpNetwork
    head: MlpNetwork
    cfg: MotionConfig

    def fingerprint(self) -> str:
        return mlp_fingerprint(self.trunk) + mlp_fingerprint(self.head)


def _aux_targets(ep, t: int, cfg: MotionConfig) -> Array:
    k = cfg.k_lag
    if cfg.aux_source == "target":
        return np.concatenate([ep.target[t], ep.tvel[t], ep.target[t + k]])
    vel = (ep.ee[t + 1] - ep.ee[t]) / ep.cfg.dt
    return np.concatenate([ep.ee[t], vel, ep.ee[t + k]])


def _valid_anchors(ep, cfg: MotionConfig) -> np.ndarray:
    # contact-free steps whose future kinematics stay inside the episode
    limit = len(ep) - cfg.k_lag
    idx = np.nonzero(ep.contact[:limit] == 0)[0]
    return idx


def motion_training_pairs(ep, t: int, cfg: MotionConfig):
    """(input diff, aux target) for one anchor; past frame is all-zeros when
    the lag reaches before the episode start."""
    now = ep.frame(t)
    past = ep.frame(t - cfg.k_lag)
    return diff_frames(now, past), _aux_targets(ep, t, cfg)


def train_motion(episodes, cfg: MotionConfig):
    """Pretrain the motion predictor on expert episodes.

    Returns (MotionPredictor, per-epoch mean losses). Anchors are sampled
    uniformly over contact-free steps of uniformly drawn episodes.
    """
    if not episodes:
        raise ConfigurationError("no episodes to train on")
    anchor_sets = [np.asarray(_valid_anchors(ep, cfg)) for ep in episodes]
    usable = [i for i, a in enumerate(anchor_sets) if len(a) > 0]
    if not usable:
        raise ConfigurationError("no contact-free anchors available")

    rng_init = spawn_rng(cfg.seed, 0)
    trunk = mlp_init(cfg.trunk_dims(), rng_init)
    # zero-init output rows: degenerate (all-zero) targets then stay exactly zero
    head = mlp_init(cfg.head_dims(), rng_init, out_scale=0.0)
    opt_t = adam_init(trunk, lr=cfg.lr)
    opt_h = adam_init(head, lr=cfg.lr)
    rng = spawn_rng(cfg.seed, 1)
    lam = np.repeat(np.asarray(cfg.lambdas, dtype=np.float64), 2)

    epoch_losses = []
    total_steps = cfg.epochs * cfg.steps_per_epoch
    step_idx = 0
    for epoch in range(cfg.epochs):
        total = 0.0
        for _ in range(cfg.steps_per_epoch):
            frac = step_idx / max(total_steps - 1, 1)
            lr_now = cfg.lr * (1.0 - frac * (1.0 - cfg.final_lr_frac))
            opt_t.lr = lr_now
            opt_h.lr = lr_now
            step_idx += 1
            diffs = np.empty((cfg.batch_size, cfg.grid_resolution ** 2))
            targets = np.empty((cfg.batch_size, AUX_DIM))
            for b in range(cfg.batch_size):
                ei = usable[rng.integers(0, len(usable))]
                ep = episodes[ei]
                t = int(anchor_sets[ei][rng.integers(0, len(anchor_sets[ei]))])
                diffs[b], targets[b] = motion_training_pairs(ep, t, cfg)
            m, cache_t = mlp_forward(trunk, diffs, want_cache=True)
            pred, cache_h = mlp_forward(head, m, want_cache=True)
            resid = pred - targets
            loss = float(((resid ** 2) * lam).sum(axis=1).mean())
            if not np.isfinite(loss):
                raise TrainingError(f"motion loss diverged at epoch {epoch} (loss={loss})")
            gout = (2.0 / cfg.batch_size) * resid * lam
            g_head, g_m = mlp_backward(head, cache_h, gout)
            g_trunk, _ = mlp_backward(trunk, cache_t, g_m)
            adam_step(head, g_head, opt_h)
            adam_step(trunk, g_trunk, opt_t)
            total += loss
        epoch_losses.append(total / cfg.steps_per_epoch)
    return MotionPredictor(trunk, head, cfg), epoch_losses


def save_motion(pred: MotionPredictor, out_dir: str) -> None:
    ensure_dir(out_dir)
    save_mlp_text(pred.trunk, os.path.join(out_dir, "trunk.txt"))
    save_mlp_text(pred.head, os.path.join(out_dir, "head.txt"))
    write_json(os.path.join(out_dir, "motion.json"), {
        "format": 1,
        "config": pred.cfg,
        "config_hash": config_hash(pred.cfg),
        "fingerprint": pred.fingerprint(),
    })


def load_motion(path: str) -> MotionPredictor:
    meta = read_json(os.path.join(path, "motion.json"))
    if meta.get("format") != 1:
        raise ConfigurationError(f"{path}: unsupported motion checkpoint format")
    kwargs = dict(meta["config"])
    for key in ("trunk_hidden", "head_hidden", "lambdas"):
        kwargs[key] = tuple(kwargs[key])
    cfg = MotionConfig(**kwargs)
    trunk = load_mlp_text(os.path.join(path, "trunk.txt"))
    head = load_mlp_text(os.path.join(path, "head.txt"))
    pred = MotionPredictor(trunk, head, cfg)
    if pred.fingerprint() != meta["fingerprint"]:
        raise ConfigurationError(f"{path}: checkpoint fingerprint mismatch")
    return pred


def motion_velocity_rmse(pred: MotionPredictor, episodes, n_samples: int = 4000,
                         seed: int = 0) -> float:
    """Component-wise RMSE of the velocity block over contact-free frames."""
    rng = spawn_rng(seed, 77)
    anchor_sets = [np.asarray(_valid_anchors(ep, pred.cfg)) for ep in episodes]
    usable = [i for i, a in enumerate(anchor_sets) if len(a) > 0]
    err = 0.0
    count = 0
    for _ in range(n_samples):
        ei = usable[rng.integers(0, len(usable))]
        ep = episodes[ei]
        t = int(anchor_sets[ei][rng.integers(0, len(anchor_sets[ei]))])
        diff, target = motion_training_pairs(ep, t, pred.cfg)
        m = motion_forward(pred.trunk, diff)
        out = mlp_forward(pred.head, m)
        err += float(((out[2:4] - target[2:4]) ** 2).sum())
        count += 2
    return float(np.sqrt(err / count))
