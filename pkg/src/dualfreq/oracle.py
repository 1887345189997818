"""Scripted expert and demonstration dataset generation.

The expert replans every control step with full state access: during approach
it pursues a lead point ahead of the target; while carrying it heads for the
goal center. Failed episodes are discarded and new seeds drawn, so datasets
contain only successful trajectories.

Gripper timing is deliberately margined rather than exact. Closing exactly at
the grasp radius puts the flip inside the grid's quantization noise, where an
imitator cannot see it; closing anywhere under GRASP_MARGIN radii costs
nothing (the grasp only latches once the true distance crosses the radius)
and makes the flip a wide, observable band. The release fires on the
effector's own position, which the policy reads exactly, with a fraction
small enough that the held target is guaranteed to be inside the goal region.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .env import (EnvConfig, WorldState, env_reset, env_step, rasterize_points,
                  read_step_records, step_record, write_step_records)
from .errors import ConfigurationError, GenerationError, ProtocolError
from .sampling import spawn_rng
from .util import config_hash, ensure_dir, read_json, write_json

Array = np.ndarray

ATTEMPT_BUDGET_FACTOR = 10
START_MARGIN = 0.05  # random start poses keep this far off the walls
NEAR_START_LO = 0.02
NEAR_START_HI = 0.15
GRASP_MARGIN = 3.0
GRIP_BAND_MAX = 5.0  # stochastic close band upper edge, in grasp radii
# release radius + worst-case grasp offset must stay inside the goal region:
# RELEASE_FRAC * goal_radius + grasp_radius <= goal_radius at the defaults
RELEASE_FRAC = 0.4
RELEASE_BAND_MAX = 1.0  # stochastic open band upper edge, in goal radii


def oracle_action(state: WorldState, cfg: EnvConfig) -> Array:
    """Full-state expert action for the current step."""
    if state.is_terminal():
        raise ProtocolError(f"no action defined for terminal phase {state.phase}")
    budget = cfg.max_step_displacement
    if state.phase == "carry":
        waypoint = np.asarray(cfg.goal_center, dtype=np.float64)
        arrived = np.linalg.norm(state.ee_pos - waypoint) <= RELEASE_FRAC * cfg.goal_radius
        grip = -1.0 if arrived else 1.0
    else:
        dist = float(np.linalg.norm(state.target_pos - state.ee_pos))
        tau = dist / cfg.robot_max_speed
        waypoint = np.clip(state.target_pos + state.target_vel * tau, 0.0, 1.0)
        grip = 1.0 if dist <= GRASP_MARGIN * cfg.grasp_radius else -1.0
    delta = waypoint - state.ee_pos
    gap = float(np.linalg.norm(delta))
    if gap > budget:
        delta = delta * (budget / gap)
    return np.array([delta[0], delta[1], grip])


def run_oracle_episode(cfg: EnvConfig, rng: np.random.Generator,
                       action_noise: float = 0.0, start: str = "canonical"):
    """Roll the expert to termination; returns (step_records, success).

    With action_noise > 0, the executed translation gets zero-mean Gaussian
    jitter of that fraction of the per-step budget while the recorded label
    stays the expert's clean action for the state actually visited. The jitter
    pushes rollouts into off-course states (trailing the target, overshooting,
    leaving the grasp band with the gripper still closed) so the dataset
    carries corrective labels for them; an imitator inevitably visits such
    states and plain expert rollouts never do.

    start picks the effector's initial pose: "canonical" keeps the env reset,
    "uniform" draws it anywhere in the workspace interior, and "near" drops it
    a short random offset from the target so the episode opens inside or just
    outside the grasp band with the gripper still open.

    Noisy rollouts also randomize the close threshold: each approach step
    outside the latch radius commands close against a band drawn uniformly in
    [1, GRIP_BAND_MAX] grasp radii, and the draw is both recorded and
    executed. A deterministic margin makes "gripper already closed" a perfect
    predictor of the close label (the expert never reopens mid-approach), and
    imitators latch onto that flag instead of the geometry, so deployed from
    an open gripper they never initiate a close. The jittered band breaks the
    correlation: given the distance, the label is independent of the flag, and
    the mean label decays smoothly from +1 at the latch radius to -1 at the
    band's outer edge. Toggling in that shell is physically free (the grasp
    only latches inside the radius, and a held target is never toggled).

    The open command gets the same treatment while carrying: each step draws a
    release band uniform in [0, RELEASE_BAND_MAX] goal radii and opens iff the
    effector is inside it. A deterministic release is a single step at the
    very end of the episode, which chunked windows almost never cover, so
    imitators learn to hold forever at the goal. Unlike the close band the
    open command has consequences, so early drops happen; a drop inside the
    goal just ends the episode early, and one outside it puts the expert back
    in approach a short hop from the goal, so the episode continues with a
    regrasp and a second delivery. Failed drops land mid-episode where every
    window offset covers them, which is exactly where the supervision was
    missing.
    """
    if action_noise < 0.0:
        raise ConfigurationError(f"action_noise must be >= 0, got {action_noise}")
    if start not in ("canonical", "uniform", "near"):
        raise ConfigurationError(f"unknown start mode {start!r}")
    state = env_reset(cfg, rng)
    if start == "uniform":
        state.ee_pos = START_MARGIN + (1.0 - 2.0 * START_MARGIN) * rng.random(2)
    elif start == "near":
        r = NEAR_START_LO + (NEAR_START_HI - NEAR_START_LO) * rng.random()
        theta = 2.0 * np.pi * rng.random()
        pose = state.target_pos + r * np.array([np.cos(theta), np.sin(theta)])
        state.ee_pos = np.clip(pose, START_MARGIN, 1.0 - START_MARGIN)
    records = []
    while not state.is_terminal():
        action = oracle_action(state, cfg)
        if action_noise > 0.0 and not state.held:
            dist = float(np.linalg.norm(state.target_pos - state.ee_pos))
            if dist > cfg.grasp_radius:
                band = (1.0 + (GRIP_BAND_MAX - 1.0) * rng.random()) * cfg.grasp_radius
                action[2] = 1.0 if dist <= band else -1.0
        elif action_noise > 0.0 and state.held:
            d_goal = float(np.linalg.norm(state.ee_pos - np.asarray(cfg.goal_center)))
            band = RELEASE_BAND_MAX * rng.random() * cfg.goal_radius
            action[2] = -1.0 if d_goal <= band else 1.0
        records.append(step_record(state, action))
        if action_noise > 0.0:
            executed = action.copy()
            executed[:2] += action_noise * cfg.max_step_displacement * rng.standard_normal(2)
            state = env_step(state, executed, cfg, rng)
        else:
            state = env_step(state, action, cfg, rng)
    return records, state.phase == "done"


@dataclass
class Episode:
    """Per-step arrays for one successful demonstration.

    Index t holds the state the step-t action was taken from. Grid frames are
    reconstructed on demand from the stored positions, which keeps episode
    files small and round-trips exactly (rasterization is deterministic).
    """

    cfg: EnvConfig
    ee: Array        # (T, 2)
    grip: Array      # (T,) 0/1, gripper closed entering the step
    held: Array      # (T,) 0/1
    contact: Array   # (T,) 0/1
    target: Array    # (T, 2)
    tvel: Array      # (T, 2)
    actions: Array   # (T, 3)

    def __len__(self) -> int:
        return self.ee.shape[0]

    def frame(self, t: int) -> Array:
        """Grid observation at step t; all-zeros for t < 0 (pre-history)."""
        if t < 0:
            g = self.cfg.grid_resolution
            return np.zeros((g, g))
        return rasterize_points(self.target[t], self.ee[t], self.cfg)

    def proprio(self, t: int) -> Array:
        return np.array([self.ee[t, 0], self.ee[t, 1],
                         float(self.grip[t]), float(self.held[t])])


def episode_from_records(records: list[dict], cfg: EnvConfig) -> Episode:
    n = len(records)
    ee = np.zeros((n, 2))
    grip = np.zeros(n, dtype=np.int64)
    held = np.zeros(n, dtype=np.int64)
    contact = np.zeros(n, dtype=np.int64)
    target = np.zeros((n, 2))
    tvel = np.zeros((n, 2))
    actions = np.zeros((n, 3))
    for i, rec in enumerate(records):
        ee[i] = rec["ee"]
        grip[i] = rec["grip"]
        held[i] = rec["held"]
        contact[i] = rec["contact"]
        target[i] = rec["target"]
        tvel[i] = rec["tvel"]
        actions[i] = rec["action"]
    return Episode(cfg, ee, grip, held, contact, target, tvel, actions)


def generate_dataset(cfg: EnvConfig, n_episodes: int, seed: int,
                     min_length: int = 28, out_dir: str | None = None,
                     action_noise: float = 0.0, random_start: float = 0.0,
                     near_start: float = 0.0, pad_terminal: int = 0):
    """Collect n_episodes successful expert episodes of length >= min_length.

    Episode attempt i uses the stream (seed, i); failures and too-short
    successes are discarded and further attempts drawn, up to a budget of
    10x n_episodes attempts. action_noise is forwarded to run_oracle_episode
    (noisy execution, clean labels). Returns (episodes, manifest dict).

    random_start and near_start are per-episode probabilities of the "uniform"
    and "near" start modes (the remainder keeps the canonical reset). The
    canonical reset always puts the effector below a target drifting in the
    upper region, so plain rollouts only ever show upward chases; an imitator
    that overshoots or loses the target ends up in relative geometries (target
    below, behind, right next to the effector) that such a dataset never
    labels. Mixed start modes cover every bearing and distance, including
    open-gripper states inside the grasp band, while leaving the evaluation
    protocol untouched; the stored records carry explicit positions, so
    downstream consumers never see the per-episode reset pose.

    pad_terminal appends that many copies of the final record to each stored
    episode. Every episode ends with the winning release, and a window of
    length L only reaches an episode's last step from the single anchor L-1
    steps back, at the far end of the horizon; imitators trained on such data
    deliver the target and then hold it at the goal forever, because the one
    label telling them to let go is effectively never sampled. The repeated
    final record is an absorbing-state pad: the world would not actually
    stay frozen after the release, but per state the supervision is exactly
    right (held at the goal, stop and open), and padding by one window length
    makes it visible at every horizon offset, including the near slots that
    carry double loss weight. Raw (unpadded) length still decides the
    min_length filter.
    """
    if n_episodes <= 0:
        raise ConfigurationError(f"n_episodes must be positive, got {n_episodes}")
    for name, p in (("random_start", random_start), ("near_start", near_start)):
        if not 0.0 <= p <= 1.0:
            raise ConfigurationError(f"{name} must be in [0, 1], got {p}")
    if random_start + near_start > 1.0:
        raise ConfigurationError(
            f"random_start + near_start must not exceed 1, got {random_start + near_start}")
    if pad_terminal < 0:
        raise ConfigurationError(f"pad_terminal must be >= 0, got {pad_terminal}")
    episodes: list[Episode] = []
    kept_records: list[list[dict]] = []
    budget = ATTEMPT_BUDGET_FACTOR * n_episodes
    attempt = 0
    while len(episodes) < n_episodes:
        if attempt >= budget:
            raise GenerationError(
                f"attempt budget exhausted: {len(episodes)}/{n_episodes} episodes "
                f"after {attempt} attempts (tier {cfg.tier})")
        rng = spawn_rng(seed, attempt)
        start = "canonical"
        if random_start + near_start > 0.0:
            u = rng.random()
            if u < near_start:
                start = "near"
            elif u < near_start + random_start:
                start = "uniform"
        records, success = run_oracle_episode(cfg, rng, action_noise, start=start)
        attempt += 1
        if success and len(records) >= min_length:
            records = records + [records[-1]] * pad_terminal
            episodes.append(episode_from_records(records, cfg))
            kept_records.append(records)

    manifest = {
        "format": 1,
        "tier": cfg.tier,
        "n_episodes": n_episodes,
        "seed": int(seed),
        "min_length": int(min_length),
        "action_noise": float(action_noise),
        "random_start": float(random_start),
        "near_start": float(near_start),
        "pad_terminal": int(pad_terminal),
        "attempts": attempt,
        "env": cfg,
        "config_hash": config_hash({"env": cfg, "seed": seed, "n": n_episodes,
                                    "min_length": min_length,
                                    "action_noise": action_noise,
                                    "random_start": random_start,
                                    "near_start": near_start,
                                    "pad_terminal": pad_terminal}),
        "episode_files": [f"episodes/ep{i:05d}.jsonl" for i in range(n_episodes)],
    }
    if out_dir is not None:
        ensure_dir(os.path.join(out_dir, "episodes"))
        for relpath, records in zip(manifest["episode_files"], kept_records):
            write_step_records(os.path.join(out_dir, relpath), records)
        write_json(os.path.join(out_dir, "manifest.json"), manifest)
    return episodes, manifest


def load_dataset(path: str):
    """Read a dataset directory back into (episodes, manifest)."""
    manifest = read_json(os.path.join(path, "manifest.json"))
    if manifest.get("format") != 1:
        raise ConfigurationError(f"{path}: unsupported dataset format")
    env_kwargs = dict(manifest["env"])
    env_kwargs["goal_center"] = tuple(env_kwargs["goal_center"])
    env_kwargs["ee_start"] = tuple(env_kwargs["ee_start"])
    cfg = EnvConfig(**env_kwargs)
    episodes = []
    for rel in manifest["episode_files"]:
        records = read_step_records(os.path.join(path, rel))
        episodes.append(episode_from_records(records, cfg))
    return episodes, manifest
