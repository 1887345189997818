import numpy as np
from dualfreq.env import EnvConfig, env_reset, env_step, rasterize, proprio_vector, contact_state
from dualfreq.oracle import generate_dataset, oracle_action
from dualfreq.motion import MotionConfig, train_motion, diff_frames, fuse_state, motion_forward
from dualfreq.dataset import ChunkingConfig
from dualfreq.flow import PolicyTrainConfig, euler_single_step
from dualfreq.harness import train_controller
from dualfreq.intent import intent_input, tag_for_tier
from dualfreq.nets import mlp_forward
from dualfreq.sampling import spawn_rng, make_rng

easy, _ = generate_dataset(EnvConfig(tier="easy"), 800, seed=1001, action_noise=0.5)
static, _ = generate_dataset(EnvConfig(tier="static"), 400, seed=1002, action_noise=0.5)
mcfg = MotionConfig(epochs=20, steps_per_epoch=400, batch_size=512, lr=2e-3,
                    lambdas=(1.0, 100.0, 1.0), seed=0)
motion, _ = train_motion(easy, mcfg)
ck = ChunkingConfig()
bundle, _ = train_controller("tidal", easy + static, motion, ck,
                             PolicyTrainConfig(steps=8000, seed=0, log_every=8000))
np.save("runs/dbg_policy.npy", np.array([1.0]))  # marker

cfg = EnvConfig(tier="easy")
noise = make_rng(5)
for i in range(2):
    state = env_reset(cfg, spawn_rng(0, 901, i))
    frames = {0: rasterize(state, cfg)}
    anchor_grid = frames[0]
    emb = mlp_forward(bundle.intent, intent_input(anchor_grid, tag_for_tier(cfg.tier)))
    k = 0
    print(f"=== episode {i}: target {state.target_pos.round(3)} vel {state.target_vel.round(4)}")
    while not state.is_terminal():
        t = state.time_step
        past = frames.get(t - motion.cfg.k_lag, np.zeros_like(anchor_grid))
        m = motion_forward(motion.trunk, diff_frames(frames[t], past))
        fused = fuse_state(proprio_vector(state), m, contact_state(state))
        chunk = euler_single_step(bundle.policy, noise, fused, emb, ck, bundle.action_scale)
        d = float(np.linalg.norm(state.target_pos - state.ee_pos))
        ora = oracle_action(state, cfg)
        h, o = chunk[0, :2], ora[:2]
        cos = float(h @ o) / (np.linalg.norm(h) * np.linalg.norm(o) + 1e-12)
        if k % 5 == 0 or d < 0.08:
            print(f"  k={k:3d} t={t:3d} dist={d:.3f} grip={chunk[0,2]:+.2f} "
                  f"|step|={np.linalg.norm(h):.4f} cos_vs_expert={cos:+.2f} "
                  f"held={state.held:d} gc={state.gripper_closed:d}")
        for j in range(ck.exec_steps):
            if state.is_terminal():
                break
            state = env_step(state, chunk[j], cfg, noise)
            frames[state.time_step] = rasterize(state, cfg)
        k += 1
        if k % ck.stages == 0 and not state.is_terminal():
            anchor_grid = frames[state.time_step]
            emb = mlp_forward(bundle.intent, intent_input(anchor_grid, tag_for_tier(cfg.tier)))
    print(f"  -> {state.phase} at t={state.time_step}")
