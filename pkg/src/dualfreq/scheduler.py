"""Dual-frequency execution scheduling under simulated compute latency.

Two inference protocols over the same trained artifacts:

  interleaved  one intent encode per macro cycle, then several cheap
               single-step chunk queries, each executing only its first
               exec_steps actions before re-querying with fresh fast state;

  batch        one full multi-step solve per cycle, executing the entire
               chunk open loop before the next solve.

Wall time is simulated from a latency model. In the paused protocol the world
freezes while compute runs; in the nonpaused protocol the world advances
ceil(latency / control_dt) steps per compute window while the robot holds
pose, so stale conditioning costs task time.

Traces record every compute completion, executed step, and free advance, which
makes the scheduling invariants and the effective chunk frequency checkable
after the fact.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .dataset import ChunkingConfig
from .env import (EnvConfig, WorldState, contact_state, env_advance_free,
                  env_reset, env_step, proprio_vector, rasterize)
from .errors import ConfigurationError, ProtocolError
from .flow import PolicyBundle, euler_single_step, multi_step_solve
from .intent import encode_intent, tag_for_tier
from .motion import MotionPredictor, diff_frames, fuse_state, motion_forward
from .util import ensure_dir

Array = np.ndarray


# --- latency model -----------------------------------------------------------

@dataclass(frozen=True)
class LatencyModel:
    vlm_ms: float = 41.0          # intent encode latency
    policy_ms: float = 19.0       # one single-step chunk query
    full_ms: float = 93.0         # monolithic encode + multi-step solve
    control_dt_ms: float = 20.0   # one control step of wall time

    def __post_init__(self):
        for name in ("vlm_ms", "policy_ms", "full_ms", "control_dt_ms"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")

    def steps_during(self, latency_ms: float) -> int:
        """World steps that elapse while a compute window of latency_ms runs."""
        return int(math.ceil(latency_ms / self.control_dt_ms))


def baseline_cycle_ms(lat: LatencyModel, chunking: ChunkingConfig) -> float:
    """Solve, then execute the whole chunk: full_ms + horizon * dt."""
    return lat.full_ms + chunking.horizon * lat.control_dt_ms


def baseline_hz(lat: LatencyModel, chunking: ChunkingConfig) -> float:
    return 1000.0 / baseline_cycle_ms(lat, chunking)


def tidal_gaps_ms(lat: LatencyModel, chunking: ChunkingConfig) -> tuple[float, float]:
    """(within-cycle gap, cycle-boundary gap) between chunk completions.

    Within a macro cycle consecutive chunks are separated by executing
    exec_steps actions plus one policy query; crossing a macro boundary adds
    the intent encode on top.
    """
    within = chunking.exec_steps * lat.control_dt_ms + lat.policy_ms
    boundary = within + lat.vlm_ms
    return within, boundary


def tidal_completion_times(lat: LatencyModel, chunking: ChunkingConfig,
                           n_chunks: int, micro_per_macro: int | None = None) -> list[float]:
    """Analytic wall-clock times of the first n_chunks chunk completions."""
    m = chunking.stages if micro_per_macro is None else micro_per_macro
    if m <= 0:
        raise ConfigurationError(f"micro_per_macro must be positive, got {m}")
    within, boundary = tidal_gaps_ms(lat, chunking)
    out = []
    t = lat.vlm_ms + lat.policy_ms
    for i in range(n_chunks):
        out.append(t)
        t += boundary if (i + 1) % m == 0 else within
    return out


def tidal_effective_hz(lat: LatencyModel, chunking: ChunkingConfig,
                       micro_per_macro: int | None = None) -> float:
    """Steady-state chunk rate: micro_per_macro chunks per macro period."""
    m = chunking.stages if micro_per_macro is None else micro_per_macro
    within, boundary = tidal_gaps_ms(lat, chunking)
    mean_gap = ((m - 1) * within + boundary) / m
    return 1000.0 / mean_gap


def tidal_peak_hz(lat: LatencyModel, chunking: ChunkingConfig) -> float:
    within, _ = tidal_gaps_ms(lat, chunking)
    return 1000.0 / within


def lifespan_micro_per_macro(lifespan: int, chunking: ChunkingConfig) -> int:
    """Micro cycles one intent embedding serves for a given lifespan.

    The embedding covers lifespan steps of which segment_len - horizon are
    already spent by the misalignment budget, so it is refreshed every
    lifespan - (segment_len - horizon) executed steps.
    """
    slack = chunking.segment_len - chunking.horizon
    usable = lifespan - slack
    if usable <= 0 or usable % chunking.exec_steps != 0:
        raise ConfigurationError(
            f"lifespan {lifespan} minus slack {slack} must be a positive "
            f"multiple of exec_steps {chunking.exec_steps}")
    return usable // chunking.exec_steps


# --- traces ------------------------------------------------------------------

@dataclass
class TraceEvent:
    kind: str        # "intent" | "chunk" | "exec" | "advance"
    wall: float      # wall-clock ms when the event finished
    world: int       # world time step the event observed or produced
    data: dict = field(default_factory=dict)


@dataclass
class RolloutTrace:
    events: list[TraceEvent]
    meta: dict

    @property
    def success(self) -> bool:
        return bool(self.meta["success"])

    def of_kind(self, kind: str) -> list[TraceEvent]:
        return [e for e in self.events if e.kind == kind]


def write_trace(trace: RolloutTrace, path: str) -> None:
    ensure_dir(os.path.dirname(path) or ".")
    with open(path, "w") as fh:
        fh.write(json.dumps({"meta": trace.meta}) + "\n")
        for e in trace.events:
            fh.write(json.dumps({"kind": e.kind, "wall": e.wall,
                                 "world": e.world, "data": e.data}) + "\n")


def read_trace(path: str) -> RolloutTrace:
    with open(path) as fh:
        lines = [json.loads(ln) for ln in fh if ln.strip()]
    if not lines or "meta" not in lines[0]:
        raise ConfigurationError(f"{path}: not a rollout trace")
    events = [TraceEvent(kind=d["kind"], wall=d["wall"], world=d["world"],
                         data=d.get("data", {})) for d in lines[1:]]
    return RolloutTrace(events=events, meta=lines[0]["meta"])


def chunk_completions(trace: RolloutTrace) -> list[float]:
    return [e.wall for e in trace.of_kind("chunk")]


def effective_hz_from_trace(trace: RolloutTrace) -> float:
    """Measured chunk rate: mean gap between completions, or the span from
    rollout start for a single-chunk trace."""
    times = chunk_completions(trace)
    if not times:
        raise ConfigurationError("trace holds no chunk completions")
    if len(times) == 1:
        return 1000.0 / times[0]
    gaps = np.diff(times)
    return 1000.0 / float(gaps.mean())


# --- rollout machinery -------------------------------------------------------

class _Clock:
    def __init__(self):
        self.wall = 0.0

    def spend(self, ms: float) -> float:
        self.wall += ms
        return self.wall


class _FrameStore:
    """Grid frames keyed by world step; negative steps read as all-zeros."""

    def __init__(self, cfg: EnvConfig):
        self.cfg = cfg
        self.frames: dict[int, Array] = {}

    def record(self, state: WorldState) -> None:
        self.frames[state.time_step] = rasterize(state, self.cfg)

    def at(self, t: int) -> Array:
        if t < 0:
            g = self.cfg.grid_resolution
            return np.zeros((g, g))
        return self.frames[t]


def _fused_now(state: WorldState, frames: _FrameStore,
               motion: MotionPredictor | None, motion_on: bool,
               motion_dim: int, k_lag: int) -> Array:
    prop = proprio_vector(state)
    contact = contact_state(state)
    if motion_on and motion is not None:
        diff = diff_frames(frames.at(state.time_step),
                           frames.at(state.time_step - k_lag))
        m = motion_forward(motion.trunk, diff)
    else:
        m = np.zeros(motion_dim)
    return fuse_state(prop, m, contact)


def _advance(state: WorldState, cfg: EnvConfig, env_rng, frames: _FrameStore,
             clock: _Clock, events: list[TraceEvent], n: int, during: str) -> WorldState:
    """Free world advances during one compute window (nonpaused only).

    Wall time for the compute window itself is charged separately by the
    caller; these steps ride inside it.
    """
    for _ in range(n):
        if state.is_terminal():
            break
        state = env_advance_free(state, cfg, env_rng, 1)
        frames.record(state)
        events.append(TraceEvent("advance", clock.wall, state.time_step,
                                 {"during": during}))
    return state


def _execute(state: WorldState, cfg: EnvConfig, env_rng, frames: _FrameStore,
             clock: _Clock, events: list[TraceEvent], chunk: Array,
             n_exec: int, chunk_id: int) -> WorldState:
    if n_exec > chunk.shape[0]:
        raise ProtocolError(
            f"cannot execute {n_exec} steps from a {chunk.shape[0]}-step chunk")
    for j in range(n_exec):
        if state.is_terminal():
            break
        state = env_step(state, chunk[j], cfg, env_rng)
        frames.record(state)
        events.append(TraceEvent("exec", clock.spend(cfg.dt * 1000.0),
                                 state.time_step,
                                 {"chunk_id": chunk_id, "offset": j}))
    return state


def _check_motion_compat(bundle: PolicyBundle, motion: MotionPredictor | None,
                         motion_on: bool) -> None:
    if motion_on and motion is None:
        raise ConfigurationError("motion_on requires a motion predictor")
    if (motion_on and motion is not None and bundle.motion_fingerprint
            and motion.fingerprint() != bundle.motion_fingerprint):
        raise ConfigurationError(
            "motion predictor does not match the one the policy trained against")


def run_tidal_rollout(bundle: PolicyBundle, motion: MotionPredictor | None,
                      env_cfg: EnvConfig, lat: LatencyModel,
                      env_rng: np.random.Generator, noise_rng: np.random.Generator,
                      *, paused: bool = True, micro_per_macro: int | None = None,
                      motion_on: bool | None = None) -> RolloutTrace:
    """Interleaved protocol: intent refresh, then micro cycles of
    query-then-execute with exec_steps actions each."""
    ck = bundle.chunking
    m_per = ck.stages if micro_per_macro is None else micro_per_macro
    if m_per <= 0:
        raise ConfigurationError(f"micro_per_macro must be positive, got {m_per}")
    motion_on = bundle.motion_on if motion_on is None else motion_on
    _check_motion_compat(bundle, motion, motion_on)
    k_lag = motion.cfg.k_lag if motion is not None else 4

    state = env_reset(env_cfg, env_rng)
    frames = _FrameStore(env_cfg)
    frames.record(state)
    clock = _Clock()
    events: list[TraceEvent] = []
    tag = tag_for_tier(env_cfg.tier)
    chunk_id = 0
    intent_id = 0

    while not state.is_terminal():
        snap_step = state.time_step
        embed = encode_intent(bundle.intent, frames.at(snap_step), tag,
                              born_step=snap_step)
        done_ms = clock.spend(lat.vlm_ms)
        events.append(TraceEvent("intent", done_ms, snap_step,
                                 {"intent_id": intent_id}))
        if not paused:
            state = _advance(state, env_cfg, env_rng, frames, clock, events,
                             lat.steps_during(lat.vlm_ms), "intent")
        for micro in range(m_per):
            if state.is_terminal():
                break
            fused = _fused_now(state, frames, motion, motion_on,
                               bundle.motion_dim, k_lag)
            cond_step = state.time_step
            done_ms = clock.spend(lat.policy_ms)
            if not paused:
                state = _advance(state, env_cfg, env_rng, frames, clock, events,
                                 lat.steps_during(lat.policy_ms), "policy")
            chunk = euler_single_step(bundle.policy, noise_rng, fused,
                                      embed.vec, ck, bundle.action_scale)
            events.append(TraceEvent("chunk", done_ms, cond_step,
                                     {"chunk_id": chunk_id, "intent_id": intent_id,
                                      "stage": micro}))
            state = _execute(state, env_cfg, env_rng, frames, clock, events,
                             chunk, ck.exec_steps, chunk_id)
            chunk_id += 1
        intent_id += 1

    executed = len([e for e in events if e.kind == "exec"])
    meta = {"protocol": "interleaved", "paused": paused, "tier": env_cfg.tier,
            "micro_per_macro": m_per, "motion_on": motion_on,
            "success": state.phase == "done", "phase": state.phase,
            "executed_steps": executed, "world_steps": state.time_step,
            "wall_ms": clock.wall, "n_chunks": chunk_id, "n_intents": intent_id,
            "final_ee": [float(state.ee_pos[0]), float(state.ee_pos[1])],
            "final_target": [float(state.target_pos[0]), float(state.target_pos[1])]}
    return RolloutTrace(events=events, meta=meta)


def run_baseline_rollout(bundle: PolicyBundle, motion: MotionPredictor | None,
                         env_cfg: EnvConfig, lat: LatencyModel,
                         env_rng: np.random.Generator, noise_rng: np.random.Generator,
                         *, paused: bool = True, solve_steps: int = 4,
                         motion_on: bool | None = None) -> RolloutTrace:
    """Batch protocol: one monolithic solve per cycle, whole chunk open loop."""
    ck = bundle.chunking
    motion_on = bundle.motion_on if motion_on is None else motion_on
    _check_motion_compat(bundle, motion, motion_on)
    k_lag = motion.cfg.k_lag if motion is not None else 4

    state = env_reset(env_cfg, env_rng)
    frames = _FrameStore(env_cfg)
    frames.record(state)
    clock = _Clock()
    events: list[TraceEvent] = []
    tag = tag_for_tier(env_cfg.tier)
    chunk_id = 0

    while not state.is_terminal():
        snap_step = state.time_step
        embed = encode_intent(bundle.intent, frames.at(snap_step), tag,
                              born_step=snap_step)
        fused = _fused_now(state, frames, motion, motion_on,
                           bundle.motion_dim, k_lag)
        done_ms = clock.spend(lat.full_ms)
        if not paused:
            state = _advance(state, env_cfg, env_rng, frames, clock, events,
                             lat.steps_during(lat.full_ms), "full")
        chunk = multi_step_solve(bundle.policy, noise_rng, fused, embed.vec,
                                 ck, bundle.action_scale, solve_steps)
        events.append(TraceEvent("intent", done_ms, snap_step,
                                 {"intent_id": chunk_id}))
        events.append(TraceEvent("chunk", done_ms, snap_step,
                                 {"chunk_id": chunk_id, "intent_id": chunk_id,
                                  "stage": 0}))
        state = _execute(state, env_cfg, env_rng, frames, clock, events,
                         chunk, ck.horizon, chunk_id)
        chunk_id += 1

    executed = len([e for e in events if e.kind == "exec"])
    meta = {"protocol": "batch", "paused": paused, "tier": env_cfg.tier,
            "solve_steps": solve_steps, "motion_on": motion_on,
            "success": state.phase == "done", "phase": state.phase,
            "executed_steps": executed, "world_steps": state.time_step,
            "wall_ms": clock.wall, "n_chunks": chunk_id, "n_intents": chunk_id,
            "final_ee": [float(state.ee_pos[0]), float(state.ee_pos[1])],
            "final_target": [float(state.target_pos[0]), float(state.target_pos[1])]}
    return RolloutTrace(events=events, meta=meta)


# --- invariants --------------------------------------------------------------

def check_trace(trace: RolloutTrace, lat: LatencyModel,
                chunking: ChunkingConfig) -> list[str]:
    """Structural invariants of a rollout trace; returns human-readable
    violations, empty when the trace is sound."""
    bad: list[str] = []
    meta = trace.meta
    interleaved = meta["protocol"] == "interleaved"

    # every executed step belongs to the newest completed chunk, uses
    # contiguous offsets from zero, and stays inside the executable prefix
    per_chunk_offsets: dict[int, list[int]] = {}
    latest_chunk = -1
    for e in trace.events:
        if e.kind == "chunk":
            if e.data["chunk_id"] != latest_chunk + 1:
                bad.append(f"chunk ids not consecutive at {e.data['chunk_id']}")
            latest_chunk = e.data["chunk_id"]
        elif e.kind == "exec":
            cid = e.data["chunk_id"]
            if cid != latest_chunk:
                bad.append(f"exec from stale chunk {cid} (latest {latest_chunk})")
            per_chunk_offsets.setdefault(cid, []).append(e.data["offset"])
    budget = chunking.exec_steps if interleaved else chunking.horizon
    for cid, offs in per_chunk_offsets.items():
        if offs != list(range(len(offs))):
            bad.append(f"chunk {cid} offsets not contiguous: {offs}")
        if len(offs) > budget:
            bad.append(f"chunk {cid} executed {len(offs)} steps, budget {budget}")

    # each intent embedding serves exactly micro_per_macro chunks except a
    # terminal truncation, and intent ids only ever step forward
    intent_of_chunk = [e.data["intent_id"] for e in trace.of_kind("chunk")]
    if intent_of_chunk != sorted(intent_of_chunk):
        bad.append("intent ids regress across chunks")
    cap = meta.get("micro_per_macro", 1) if interleaved else 1
    last_intent = max(intent_of_chunk, default=-1)
    for iid in set(intent_of_chunk):
        n = intent_of_chunk.count(iid)
        if n > cap:
            bad.append(f"intent {iid} served {n} chunks, cap {cap}")
        elif n != cap and iid != last_intent:
            bad.append(f"intent {iid} served {n} chunks, expected {cap}")

    # a completed cycle executes its full step budget: every chunk but the
    # last runs exactly budget steps (interleaved), / the whole horizon (batch)
    for cid, offs in per_chunk_offsets.items():
        if cid != latest_chunk and len(offs) != budget:
            bad.append(f"completed chunk {cid} executed {len(offs)} of {budget} steps")

    # backbone iso-compute: wall time decomposes exactly into the charged
    # inference windows plus executed control steps, for both protocols
    n_exec_steps = len(trace.of_kind("exec"))
    if interleaved:
        expect_wall = (meta["n_intents"] * lat.vlm_ms
                       + meta["n_chunks"] * lat.policy_ms
                       + n_exec_steps * lat.control_dt_ms)
    else:
        expect_wall = (meta["n_chunks"] * lat.full_ms
                       + n_exec_steps * lat.control_dt_ms)
    if abs(meta["wall_ms"] - expect_wall) > 1e-6:
        bad.append(f"wall {meta['wall_ms']} ms != charged compute+exec {expect_wall} ms")

    # world bookkeeping: every world step came from exactly one exec or
    # advance event
    n_exec = len(trace.of_kind("exec"))
    n_adv = len(trace.of_kind("advance"))
    if n_exec != meta["executed_steps"]:
        bad.append(f"executed_steps meta {meta['executed_steps']} != {n_exec} events")
    if n_exec + n_adv != meta["world_steps"]:
        bad.append(f"world steps {meta['world_steps']} != exec {n_exec} + advance {n_adv}")
    if meta["paused"] and n_adv != 0:
        bad.append(f"paused rollout recorded {n_adv} free advances")
    if not meta["paused"] and interleaved and meta["n_intents"] > 0 and n_adv == 0:
        bad.append("nonpaused rollout recorded no free advances")

    # completion wall times follow the latency arithmetic exactly (the world
    # pause does not change wall accounting, only world advancement)
    times = chunk_completions(trace)
    if interleaved:
        expect = tidal_completion_times(lat, chunking, len(times),
                                        meta["micro_per_macro"])
    else:
        cycle = baseline_cycle_ms(lat, chunking)
        expect = [lat.full_ms + i * cycle for i in range(len(times))]
    for i, (got, want) in enumerate(zip(times, expect)):
        if abs(got - want) > 1e-6:
            bad.append(f"chunk {i} completed at {got} ms, schedule says {want}")
            break
    return bad
