import numpy as np
from dualfreq.env import EnvConfig, env_reset, env_step, rasterize, proprio_vector, contact_state
from dualfreq.oracle import generate_dataset
from dualfreq.motion import MotionConfig, train_motion, diff_frames, fuse_state, motion_forward
from dualfreq.dataset import ChunkingConfig
from dualfreq.flow import PolicyTrainConfig, euler_single_step
from dualfreq.harness import train_controller
from dualfreq.intent import intent_input, tag_for_tier
from dualfreq.nets import mlp_forward
from dualfreq.sampling import spawn_rng, make_rng

easy, _ = generate_dataset(EnvConfig(tier="easy"), 800, seed=1001)
static, _ = generate_dataset(EnvConfig(tier="static"), 400, seed=1002)
mcfg = MotionConfig(epochs=20, steps_per_epoch=400, batch_size=512, lr=2e-3,
                    lambdas=(1.0, 100.0, 1.0), seed=0)
motion, _ = train_motion(easy, mcfg)
ck = ChunkingConfig()
bundle, _ = train_controller("tidal", easy + static, motion, ck,
                             PolicyTrainConfig(steps=8000, seed=0, log_every=4000))

cfg = EnvConfig(tier="easy")
noise = make_rng(5)
rows = []
for i in range(8):
    state = env_reset(cfg, spawn_rng(0, 901, i))
    frames = {0: rasterize(state, cfg)}
    anchor_target = state.target_pos.copy()
    anchor_grid = frames[0]
    emb = mlp_forward(bundle.intent, intent_input(anchor_grid, tag_for_tier(cfg.tier)))
    k = 0
    while not state.is_terminal():
        t = state.time_step
        past = frames.get(t - motion.cfg.k_lag, np.zeros_like(anchor_grid))
        m = motion_forward(motion.trunk, diff_frames(frames[t], past))
        fused = fuse_state(proprio_vector(state), m, contact_state(state))
        chunk = euler_single_step(bundle.policy, noise, fused, emb, ck, bundle.action_scale)
        d_true = float(np.linalg.norm(state.target_pos - state.ee_pos))
        d_anchor = float(np.linalg.norm(anchor_target - state.ee_pos))
        if not state.held:
            rows.append((d_true, d_anchor, float(chunk[0, 2])))
        for j in range(ck.exec_steps):
            if state.is_terminal():
                break
            state = env_step(state, chunk[j], cfg, noise)
            frames[state.time_step] = rasterize(state, cfg)
        k += 1
        if k % ck.stages == 0 and not state.is_terminal():
            anchor_grid = frames[state.time_step]
            anchor_target = state.target_pos.copy()
            emb = mlp_forward(bundle.intent, intent_input(anchor_grid, tag_for_tier(cfg.tier)))

rows = np.array(rows)
print("closed-loop solves, approach phase only:")
print("true dist    anchor dist   n    P(grip+)")
bins = [0.0, 0.02, 0.04, 0.06, 0.09, 0.13, 1.0]
for lo, hi in zip(bins[:-1], bins[1:]):
    sel = (rows[:, 0] >= lo) & (rows[:, 0] < hi)
    if sel.sum():
        print(f"[{lo:.2f},{hi:.2f})   {rows[sel,1].mean():.3f}       {sel.sum():4d}   "
              f"{np.mean(rows[sel,2] > 0):.3f}")
sel = rows[:, 1] < 0.06
print(f"\nsolves with ANCHOR dist < 0.06: {sel.sum()}, P(grip+) {np.mean(rows[sel,2]>0):.3f}"
      if sel.sum() else "\nno solves with anchor dist < 0.06")
