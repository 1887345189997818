import sys
import numpy as np
from dualfreq.env import (EnvConfig, env_reset, env_step, rasterize,
                          proprio_vector, contact_state)
from dualfreq.motion import load_motion, diff_frames, fuse_state, motion_forward
from dualfreq.flow import load_policy_bundle, euler_single_step
from dualfreq.intent import intent_input, tag_for_tier
from dualfreq.nets import mlp_forward
from dualfreq.sampling import spawn_rng, make_rng

ART = sys.argv[1]
EP = int(sys.argv[2]) if len(sys.argv) > 2 else 0
motion = load_motion(ART + "/motion")
bundle = load_policy_bundle(ART + "/tidal")
ck = bundle.chunking
cfg = EnvConfig(tier="static")
G = cfg.grid_resolution

state = env_reset(cfg, spawn_rng(0, 901, EP))
print(f"goal={state.goal_pos} goal_radius={cfg.goal_radius} tgt={state.target_pos}")
frames = {0: rasterize(state, cfg)}
emb = mlp_forward(bundle.intent, intent_input(frames[0], tag_for_tier("static")))
noise = make_rng(5)
k = 0
events = []
prev_held = False
while not state.is_terminal():
    t = state.time_step
    past = frames.get(t - motion.cfg.k_lag, np.zeros_like(frames[0]))
    m = motion_forward(motion.trunk, diff_frames(frames[t], past))
    fused = fuse_state(proprio_vector(state), m, contact_state(state))
    chunk = euler_single_step(bundle.policy, noise, fused, emb, ck, bundle.action_scale)
    if state.held:
        d_goal = np.linalg.norm(state.ee_pos - state.goal_pos)
        step_mag = np.linalg.norm(chunk[0, :2])
        to_goal = state.goal_pos - state.ee_pos
        cos = 0.0
        if step_mag > 1e-9 and d_goal > 1e-9:
            cos = float(chunk[0, :2] @ to_goal / (step_mag * d_goal + 1e-12))
        if k % 5 == 0:
            print(f"t={t:3d} held d_goal={d_goal:.3f} |step|={step_mag:.4f} cos_goal={cos:+.2f} grip={chunk[0,2]:+.2f}")
    for j in range(ck.exec_steps):
        if state.is_terminal():
            break
        state = env_step(state, chunk[j], cfg, noise)
        frames[state.time_step] = rasterize(state, cfg)
        if state.held != prev_held:
            events.append((state.time_step, "latch" if state.held else "drop", state.phase,
                           tuple(np.round(state.ee_pos, 3))))
            prev_held = state.held
    k += 1
    if k % ck.stages == 0 and not state.is_terminal():
        emb = mlp_forward(bundle.intent, intent_input(frames[state.time_step], tag_for_tier("static")))
print("events:", events[:20])
print("end:", state.phase, "t=", state.time_step)
