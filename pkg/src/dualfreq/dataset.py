"""Temporally misaligned training views over expert episodes.

A sample pairs a frozen macro observation from anchor step tau with the fused
fast state from tau + k*N and the action segment starting there, teaching the
policy to act under every intent staleness it will meet at deployment. The
latency stage k is drawn uniformly from {0..K-1}; stage 0 reproduces ordinary
synchronous conditioning.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, SegmentOverrunError
from .intent import intent_input, tag_for_tier, TASK_TAGS
from .motion import MotionConfig, MotionPredictor, diff_frames, fuse_state, motion_forward
from .oracle import Episode

Array = np.ndarray

PROPRIO_DIM = 4


@dataclass(frozen=True)
class ChunkingConfig:
    horizon: int = 16        # actions generated per query
    exec_steps: int = 4      # actions executed per fast-loop iteration
    stages: int = 4          # fast-loop iterations per macro cycle
    action_dim: int = 3
    weight_near: float = 2.0  # loss weight on the first exec_steps actions
    weight_far: float = 1.0

    def __post_init__(self):
        if self.horizon <= 0 or self.exec_steps <= 0 or self.stages <= 0:
            raise ConfigurationError("horizon, exec_steps, stages must be positive")
        if self.exec_steps > self.horizon:
            raise ConfigurationError("exec_steps cannot exceed horizon")
        if self.weight_near <= 0 or self.weight_far <= 0:
            raise ConfigurationError("loss weights must be positive")

    @property
    def segment_len(self) -> int:
        return segment_length(self.horizon, self.exec_steps, self.stages)

    def weights(self) -> Array:
        """Per-index loss weights; a function of (horizon, exec_steps) only."""
        w = np.full(self.horizon, self.weight_far)
        w[: self.exec_steps] = self.weight_near
        return w


def segment_length(horizon: int, exec_steps: int, stages: int) -> int:
    """Episode steps one sample can reach: H + (K-1)*N."""
    if horizon <= 0 or exec_steps <= 0 or stages <= 0:
        raise ConfigurationError("horizon, exec_steps, stages must be positive")
    return horizon + (stages - 1) * exec_steps


def sample_latency_stage(rng: np.random.Generator, stages: int) -> int:
    """Uniform draw over {0, ..., stages-1}."""
    if stages <= 0:
        raise ConfigurationError(f"stages must be positive, got {stages}")
    return int(rng.integers(0, stages))


@dataclass
class MisalignedSample:
    macro_input: Array    # flattened anchor-step grid plus task tag one-hot
    fused: Array          # proprio + gated motion at tau + k*N
    actions: Array        # (horizon, 3) raw env actions from tau + k*N
    stage: int
    anchor: int
    tag: str


def _motion_block(ep: Episode, t: int, motion: MotionPredictor | None,
                  mcfg: MotionConfig, motion_on: bool) -> Array:
    if not motion_on or motion is None:
        return np.zeros(mcfg.motion_dim)
    diff = diff_frames(ep.frame(t), ep.frame(t - mcfg.k_lag))
    return motion_forward(motion.trunk, diff)


def build_sample(ep: Episode, anchor: int, stage: int, chunking: ChunkingConfig,
                 motion: MotionPredictor | None, motion_on: bool = True) -> MisalignedSample:
    """Assemble one misaligned view anchored at step `anchor` with stage k."""
    if not (0 <= stage < chunking.stages):
        raise ConfigurationError(f"stage {stage} outside 0..{chunking.stages - 1}")
    if anchor < 0 or anchor + chunking.segment_len > len(ep):
        raise SegmentOverrunError(
            f"anchor {anchor} + segment {chunking.segment_len} exceeds episode length {len(ep)}")
    mcfg = motion.cfg if motion is not None else MotionConfig(
        grid_resolution=ep.cfg.grid_resolution)
    t_exec = anchor + stage * chunking.exec_steps
    tag = tag_for_tier(ep.cfg.tier)
    m = _motion_block(ep, t_exec, motion, mcfg, motion_on)
    fused = fuse_state(ep.proprio(t_exec), m, int(ep.contact[t_exec]))
    actions = ep.actions[t_exec: t_exec + chunking.horizon].copy()
    return MisalignedSample(
        macro_input=intent_input(ep.frame(anchor), tag),
        fused=fused,
        actions=actions,
        stage=stage,
        anchor=anchor,
        tag=tag,
    )


@dataclass
class Batch:
    """Packed arrays for one training step; raw pieces kept separate so
    gradients can flow through the motion trunk when a check needs them."""
    macro_in: Array   # (B, G*G + n_tags)
    s_prop: Array     # (B, 4)
    diffs: Array      # (B, G*G) motion-net inputs
    contact: Array    # (B,)
    actions: Array    # (B, horizon, 3)
    stages: Array     # (B,)
    anchors: Array    # (B,)
    episode_idx: Array  # (B,)

    def __len__(self) -> int:
        return self.macro_in.shape[0]


def batch_iter(episodes: list[Episode], chunking: ChunkingConfig,
               mcfg: MotionConfig, rng: np.random.Generator, batch_size: int,
               stage_sampling: str = "uniform"):
    """Infinite stream of packed batches.

    Episodes, anchors, and stages are sampled independently per element.
    stage_sampling = "zero" pins k = 0 (synchronous conditioning).
    """
    if batch_size <= 0:
        raise ConfigurationError(f"batch_size must be positive, got {batch_size}")
    if stage_sampling not in ("uniform", "zero"):
        raise ConfigurationError(f"unknown stage_sampling {stage_sampling!r}")
    seg = chunking.segment_len
    valid = [i for i, ep in enumerate(episodes) if len(ep) >= seg]
    if not valid:
        raise ConfigurationError(f"no episode is at least {seg} steps long")
    g2 = episodes[0].cfg.grid_resolution ** 2
    n_tags = len(TASK_TAGS)
    tag_idx = {ep_i: TASK_TAGS.index(tag_for_tier(episodes[ep_i].cfg.tier)) for ep_i in valid}

    while True:
        b = batch_size
        macro_in = np.zeros((b, g2 + n_tags))
        s_prop = np.zeros((b, PROPRIO_DIM))
        diffs = np.zeros((b, g2))
        contact = np.zeros(b, dtype=np.int64)
        actions = np.zeros((b, chunking.horizon, chunking.action_dim))
        stages = np.zeros(b, dtype=np.int64)
        anchors = np.zeros(b, dtype=np.int64)
        ep_idx = np.zeros(b, dtype=np.int64)
        for j in range(b):
            ei = valid[rng.integers(0, len(valid))]
            ep = episodes[ei]
            anchor = int(rng.integers(0, len(ep) - seg + 1))
            k = 0 if stage_sampling == "zero" else sample_latency_stage(rng, chunking.stages)
            t_exec = anchor + k * chunking.exec_steps
            macro_in[j, :g2] = ep.frame(anchor).ravel()
            macro_in[j, g2 + tag_idx[ei]] = 1.0
            s_prop[j] = ep.proprio(t_exec)
            diffs[j] = diff_frames(ep.frame(t_exec), ep.frame(t_exec - mcfg.k_lag))
            contact[j] = ep.contact[t_exec]
            actions[j] = ep.actions[t_exec: t_exec + chunking.horizon]
            stages[j] = k
            anchors[j] = anchor
            ep_idx[j] = ei
        yield Batch(macro_in, s_prop, diffs, contact, actions, stages, anchors, ep_idx)
