"""
Interception world tour
=======================

Walks the simulated tabletop once by hand: spawn a moving target, drive the
end-effector straight at it, watch the boundary turn, grasp, carry to the
drawer. Prints an ASCII render of the 16x16 grid observation partway through
so you can see exactly what the intent encoder sees.

Run:  python3 demos/01_world_tour.py
"""

import numpy as np

from dualfreq.env import EnvConfig, contact_state, env_reset, env_step, proprio_vector, rasterize
from dualfreq.sampling import make_rng

GLYPHS = {0.0: ".", 0.3: "g", 0.6: "E", 0.9: "#", 1.0: "T", 1.3: "+", 1.6: "*", 1.9: "@"}


def render(grid):
    for row in grid.T[::-1]:                    # grid is [ix, iy]; show y up
        print("".join(GLYPHS.get(round(float(v), 2), "?") for v in row))


cfg = EnvConfig(tier="easy")
budget = cfg.robot_max_speed * cfg.dt
rng = make_rng(7)
state = env_reset(cfg, rng)
print(f"target at {state.target_pos.round(3)}, velocity {state.target_vel.round(4)} "
      f"({np.linalg.norm(state.target_vel):.4f} units/s)")
print(f"ee at {state.ee_pos.round(3)}, goal region around {cfg.goal_center}, "
      f"per-step travel budget {budget}\n")

for t in range(cfg.max_steps):
    if state.is_terminal():
        break
    # naive chase: full-budget step toward the target, grab when close,
    # then haul to the goal. No lead term, so slow targets only.
    to_target = state.target_pos - state.ee_pos
    dist = np.linalg.norm(to_target)
    if state.held:
        head = np.asarray(cfg.goal_center) - state.ee_pos
        grip = 1.0 if np.linalg.norm(head) > cfg.goal_radius * 0.5 else -1.0
    else:
        head = to_target
        grip = 1.0 if dist < cfg.grasp_radius * 0.8 else -1.0
    norm = np.linalg.norm(head)
    step = head / norm * budget if norm > budget else head
    state = env_step(state, np.array([step[0], step[1], grip]), cfg, rng)
    if t % 40 == 0:
        print(f"t={state.time_step:3d} phase={state.phase:6s} "
              f"dist={np.linalg.norm(state.target_pos - state.ee_pos):.3f} "
              f"contact={contact_state(state)} proprio={proprio_vector(state).round(3)}")
    if t == 80:
        print()
        render(rasterize(state, cfg))
        print()

print(f"\nfinished: phase={state.phase} after {state.time_step} steps")
print("legend: T target, E effector, g goal, stacked markers use summed intensities")
