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

easy, _ = generate_dataset(EnvConfig(tier="easy"), 200, seed=1001)
static, _ = generate_dataset(EnvConfig(tier="static"), 100, seed=1002)
mcfg = MotionConfig(epochs=4, steps_per_epoch=200, batch_size=256, lr=2e-3,
                    lambdas=(1.0, 100.0, 1.0), seed=0)
motion, _ = train_motion(easy, mcfg)
ck = ChunkingConfig()
bundle, _ = train_controller("tidal", easy + static, motion, ck,
                             PolicyTrainConfig(steps=4000, seed=0, log_every=1000))

cfg = EnvConfig(tier="easy")
noise = make_rng(5)
wins = 0
for i in range(10):
    state = env_reset(cfg, spawn_rng(0, 901, i))
    frames = {0: rasterize(state, cfg)}
    anchor_grid = frames[0]
    emb = mlp_forward(bundle.intent, intent_input(anchor_grid, tag_for_tier(cfg.tier)))
    k = 0
    log = []
    while not state.is_terminal():
        t = state.time_step
        past = frames.get(t - motion.cfg.k_lag, np.zeros_like(anchor_grid))
        m = motion_forward(motion.trunk, diff_frames(frames[t], past))
        fused = fuse_state(proprio_vector(state), m, contact_state(state))
        chunk = euler_single_step(bundle.policy, noise, fused, emb, ck, bundle.action_scale)
        for j in range(ck.exec_steps):
            if state.is_terminal():
                break
            state = env_step(state, chunk[j], cfg, noise)
            frames[state.time_step] = rasterize(state, cfg)
        k += 1
        if k % ck.stages == 0 and not state.is_terminal():
            anchor_grid = frames[state.time_step]
            emb = mlp_forward(bundle.intent, intent_input(anchor_grid, tag_for_tier(cfg.tier)))
        if t % 60 == 0:
            log.append(f"  t={t:3d} dist={np.linalg.norm(state.target_pos-state.ee_pos):.3f} "
                       f"grip={chunk[0,2]:+.2f} phase={state.phase}")
    wins += state.phase == "done"
    print(f"ep {i}: {state.phase} at t={state.time_step}")
    if i < 3:
        print("\n".join(log))
print(f"hand loop: {wins}/10")
