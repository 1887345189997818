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
motion = load_motion(ART + "/motion")
bundle = load_policy_bundle(ART + "/tidal")
ck = bundle.chunking
cfg = EnvConfig(tier="static")
G = cfg.grid_resolution

for i in range(6):
    state = env_reset(cfg, spawn_rng(0, 901, i))
    frames = {0: rasterize(state, cfg)}
    emb = mlp_forward(bundle.intent, intent_input(frames[0], tag_for_tier("static")))
    noise = make_rng(5)
    k = 0
    tail = []
    latched = None
    while not state.is_terminal():
        t = state.time_step
        past = frames.get(t - motion.cfg.k_lag, np.zeros_like(frames[0]))
        m = motion_forward(motion.trunk, diff_frames(frames[t], past))
        fused = fuse_state(proprio_vector(state), m, contact_state(state))
        chunk = euler_single_step(bundle.policy, noise, fused, emb, ck, bundle.action_scale)
        if t >= 300:
            tail.append(state.ee_pos.copy())
        for j in range(ck.exec_steps):
            if state.is_terminal():
                break
            state = env_step(state, chunk[j], cfg, noise)
            frames[state.time_step] = rasterize(state, cfg)
            if state.held and latched is None:
                latched = state.time_step
        k += 1
        if k % ck.stages == 0 and not state.is_terminal():
            emb = mlp_forward(bundle.intent, intent_input(frames[state.time_step], tag_for_tier("static")))
    tgt = state.target_pos
    cell = np.floor(tgt * G)
    center = (cell + 0.5) / G
    if tail:
        settle = np.mean(tail, axis=0)
        wobble = np.std(tail, axis=0)
        print(f"ep{i}: tgt=({tgt[0]:.4f},{tgt[1]:.4f}) cellcenter=({center[0]:.4f},{center[1]:.4f}) "
              f"settle=({settle[0]:.4f},{settle[1]:.4f})")
        print(f"     |settle-tgt|={np.linalg.norm(settle-tgt):.4f} "
              f"|settle-cc|={np.linalg.norm(settle-center):.4f} "
              f"|cc-tgt|={np.linalg.norm(center-tgt):.4f} wobble=({wobble[0]:.4f},{wobble[1]:.4f}) "
              f"end={state.phase} latched@{latched}")
    else:
        print(f"ep{i}: ended {state.phase} at t={state.time_step} latched@{latched}")
