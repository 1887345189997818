"""2D dynamic interception world on the unit square.

A point end-effector pursues a drifting target, grasps it within a small
radius, carries it to a fixed goal region, and releases. Simulation runs at a
fixed control period; one env_step consumes one period. env_advance_free moves
only the world, modeling computation windows where the robot holds still.

States are values: stepping returns a new WorldState and never mutates the
input. All randomness flows through the caller's Generator.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ProtocolError

Array = np.ndarray

TIERS = ("easy", "hard", "static")
PHASES = ("approach", "carry", "done", "failed")

# grid marker intensities; cells sum when markers coincide
TARGET_INTENSITY = 1.0
EE_INTENSITY = 0.6
GOAL_INTENSITY = 0.3
MAX_CELL_INTENSITY = TARGET_INTENSITY + EE_INTENSITY + GOAL_INTENSITY  # 1.9

_EASY_DIRS = np.array([[1.0, 0.0], [0.0, 1.0]])
_HARD_DIRS = np.array([[-1.0, 0.0], [0.0, -1.0]])


@dataclass(frozen=True)
class EnvConfig:
    dt: float = 0.02
    tier: str = "easy"
    target_speed_min: float = 0.04
    target_speed_max: float = 0.06
    turn_at_boundary: bool = True
    robot_max_speed: float = 0.15
    grasp_radius: float = 0.03
    goal_center: tuple[float, float] = (0.5, 0.9)
    goal_radius: float = 0.05
    max_steps: int = 600
    grid_resolution: int = 16
    ee_start: tuple[float, float] = (0.5, 0.1)
    target_init_lo: float = 0.2
    target_init_hi: float = 0.8

    def __post_init__(self):
        if self.tier not in TIERS:
            raise ConfigurationError(f"unknown tier {self.tier!r}")
        if self.dt <= 0.0:
            raise ConfigurationError("dt must be positive")
        if not (0.0 < self.grasp_radius < self.goal_radius < 0.5):
            raise ConfigurationError(
                f"need 0 < grasp_radius < goal_radius < 0.5, got "
                f"{self.grasp_radius}, {self.goal_radius}")
        if self.robot_max_speed <= self.target_speed_max:
            raise ConfigurationError("robot must be faster than the target")
        if self.target_speed_min > self.target_speed_max or self.target_speed_min < 0.0:
            raise ConfigurationError("bad target speed range")
        if self.max_steps <= 0 or self.grid_resolution <= 0:
            raise ConfigurationError("max_steps and grid_resolution must be positive")

    @property
    def max_step_displacement(self) -> float:
        return self.robot_max_speed * self.dt


@dataclass
class WorldState:
    time_step: int
    ee_pos: Array
    gripper_closed: bool
    target_pos: Array
    target_vel: Array
    held: bool
    phase: str
    grasp_offset: Array | None = None

    def is_terminal(self) -> bool:
        return self.phase in ("done", "failed")


def env_reset(cfg: EnvConfig, rng: np.random.Generator) -> WorldState:
    """Initial state: ee parked at the start pose, target placed uniformly."""
    target = cfg.target_init_lo + (cfg.target_init_hi - cfg.target_init_lo) * rng.random(2)
    if cfg.tier == "static":
        vel = np.zeros(2)
    else:
        speed = cfg.target_speed_min + (cfg.target_speed_max - cfg.target_speed_min) * rng.random()
        dirs = _EASY_DIRS if cfg.tier == "easy" else _HARD_DIRS
        vel = speed * dirs[rng.integers(0, len(dirs))]
    return WorldState(
        time_step=0,
        ee_pos=np.array(cfg.ee_start, dtype=np.float64),
        gripper_closed=False,
        target_pos=target,
        target_vel=vel,
        held=False,
        phase="approach",
    )


def _rot90(v: Array, sign: int) -> Array:
    # +1 rotates (vx, vy) -> (-vy, vx); -1 rotates to (vy, -vx)
    if sign > 0:
        return np.array([-v[1], v[0]])
    return np.array([v[1], -v[0]])


def _in_bounds(p: Array) -> bool:
    return bool(0.0 <= p[0] <= 1.0 and 0.0 <= p[1] <= 1.0)


def _advance_target(pos: Array, vel: Array, cfg: EnvConfig, rng: np.random.Generator):
    """One control period of free target motion with boundary turns.

    A step that would exit the workspace instead turns the velocity 90 degrees,
    the sign chosen by a fair coin; if that still exits (corner) the other sign
    is tried, then a full reversal. Speed magnitude is preserved exactly.
    """
    if vel[0] == 0.0 and vel[1] == 0.0:
        return pos.copy(), vel.copy()
    nxt = pos + vel * cfg.dt
    if _in_bounds(nxt) or not cfg.turn_at_boundary:
        return np.clip(nxt, 0.0, 1.0), vel.copy()
    sign = 1 if rng.random() < 0.5 else -1
    for s in (sign, -sign):
        cand = _rot90(vel, s)
        nxt = pos + cand * cfg.dt
        if _in_bounds(nxt):
            return nxt, cand
    cand = -vel
    return np.clip(pos + cand * cfg.dt, 0.0, 1.0), cand


def clip_action(action, cfg: EnvConfig) -> Array:
    """Clamp (dx, dy) to the per-step displacement budget and grip to [-1, 1]."""
    a = np.asarray(action, dtype=np.float64)
    if a.shape != (3,):
        raise ConfigurationError(f"action must have shape (3,), got {a.shape}")
    out = a.copy()
    disp = math.hypot(a[0], a[1])
    budget = cfg.max_step_displacement
    if disp > budget and disp > 0.0:
        out[0] *= budget / disp
        out[1] *= budget / disp
    out[2] = min(1.0, max(-1.0, a[2]))
    return out


def env_step(state: WorldState, action, cfg: EnvConfig, rng: np.random.Generator) -> WorldState:
    """Advance one control period under (dx, dy, grip).

    Order within the period: the ee moves (displacement clipped to the speed
    budget, position clamped to the workspace), a held target rides rigidly,
    a free target advances with boundary turns, then the gripper transition is
    applied. grip > 0 closes; opening while held releases, and a release inside
    the goal region ends the episode successfully. Hitting max_steps fails it.
    """
    if state.is_terminal():
        raise ProtocolError(f"cannot step a terminal state (phase {state.phase})")
    a = clip_action(action, cfg)

    ee = np.clip(state.ee_pos + a[:2], 0.0, 1.0)
    held = state.held
    phase = state.phase
    offset = state.grasp_offset
    vel = state.target_vel.copy()

    if held:
        target = ee + offset
    else:
        target, vel = _advance_target(state.target_pos, state.target_vel, cfg, rng)

    want_closed = a[2] > 0.0
    if held and not want_closed:
        held = False
        offset = None
        if np.linalg.norm(target - np.asarray(cfg.goal_center)) <= cfg.goal_radius:
            phase = "done"
        else:
            phase = "approach"
    elif (not held) and want_closed and phase == "approach":
        if np.linalg.norm(target - ee) <= cfg.grasp_radius:
            held = True
            offset = target - ee
            phase = "carry"

    t = state.time_step + 1
    if phase not in ("done",) and t >= cfg.max_steps:
        phase = "failed"

    return WorldState(
        time_step=t,
        ee_pos=ee,
        gripper_closed=want_closed,
        target_pos=target,
        target_vel=vel,
        held=held,
        phase=phase,
        grasp_offset=None if offset is None else np.asarray(offset, dtype=np.float64),
    )


def env_advance_free(state: WorldState, cfg: EnvConfig, rng: np.random.Generator,
                     n_steps: int) -> WorldState:
    """Advance the world n_steps periods while the robot holds pose and grip.

    Models computation latency in the nonpaused protocol. The simulated clock
    advances, so long enough computation can time an episode out.
    """
    if n_steps < 0:
        raise ConfigurationError(f"n_steps must be >= 0, got {n_steps}")
    if n_steps == 0:
        return state
    if state.is_terminal():
        raise ProtocolError(f"cannot advance a terminal state (phase {state.phase})")
    pos = state.target_pos
    vel = state.target_vel
    if not state.held:
        for _ in range(n_steps):
            pos, vel = _advance_target(pos, vel, cfg, rng)
    t = state.time_step + n_steps
    phase = state.phase
    if t >= cfg.max_steps:
        phase = "failed"
    return WorldState(
        time_step=t,
        ee_pos=state.ee_pos.copy(),
        gripper_closed=state.gripper_closed,
        target_pos=np.asarray(pos, dtype=np.float64).copy(),
        target_vel=np.asarray(vel, dtype=np.float64).copy(),
        held=state.held,
        phase=phase,
        grasp_offset=None if state.grasp_offset is None else state.grasp_offset.copy(),
    )


def _cell_index(x: float, resolution: int) -> int:
    return min(int(math.floor(x * resolution)), resolution - 1)


def rasterize_points(target_pos, ee_pos, cfg: EnvConfig) -> Array:
    """Render target, ee, and goal markers onto a (G, G) intensity grid.

    Nearest-cell placement: position p lands in cell floor(p * G), clamped at
    the high edge. Intensities add when markers share a cell, so entries stay
    within [0, 1.9].
    """
    g = cfg.grid_resolution
    grid = np.zeros((g, g))
    for pos, intensity in (
        (np.asarray(target_pos), TARGET_INTENSITY),
        (np.asarray(ee_pos), EE_INTENSITY),
        (np.asarray(cfg.goal_center), GOAL_INTENSITY),
    ):
        grid[_cell_index(pos[0], g), _cell_index(pos[1], g)] += intensity
    return grid


def rasterize(state: WorldState, cfg: EnvConfig) -> Array:
    return rasterize_points(state.target_pos, state.ee_pos, cfg)


def contact_state(state: WorldState) -> int:
    """1 while the target is rigidly held, else 0."""
    return 1 if state.held else 0


def proprio_vector(state: WorldState) -> Array:
    """Low-dimensional readout the controller always sees fresh."""
    return np.array([
        state.ee_pos[0],
        state.ee_pos[1],
        1.0 if state.gripper_closed else 0.0,
        1.0 if state.held else 0.0,
    ])


# --- line-delimited step records -------------------------------------------

def step_record(state: WorldState, action) -> dict:
    """One serializable record: the state an action was taken from, plus the action."""
    a = np.asarray(action, dtype=np.float64)
    return {
        "t": int(state.time_step),
        "ee": [float(state.ee_pos[0]), float(state.ee_pos[1])],
        "grip": int(state.gripper_closed),
        "held": int(state.held),
        "contact": contact_state(state),
        "target": [float(state.target_pos[0]), float(state.target_pos[1])],
        "tvel": [float(state.target_vel[0]), float(state.target_vel[1])],
        "phase": state.phase,
        "action": [float(a[0]), float(a[1]), float(a[2])],
    }


def write_step_records(path: str, records: list[dict]) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def read_step_records(path: str) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
