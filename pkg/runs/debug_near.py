import os, sys
import numpy as np
from dualfreq.env import EnvConfig, env_reset, env_step, rasterize, proprio_vector, contact_state
from dualfreq.oracle import generate_dataset, oracle_action
from dualfreq.motion import (MotionConfig, train_motion, diff_frames, fuse_state,
                             motion_forward, save_motion, load_motion)
from dualfreq.dataset import ChunkingConfig
from dualfreq.flow import (PolicyTrainConfig, euler_single_step,
                           save_policy_bundle, load_policy_bundle)
from dualfreq.harness import train_controller
from dualfreq.intent import intent_input, tag_for_tier
from dualfreq.nets import mlp_forward
from dualfreq.sampling import spawn_rng, make_rng

ART = "runs/dbg_art"
if not os.path.isdir(ART):
    easy, _ = generate_dataset(EnvConfig(tier="easy"), 800, seed=1001, action_noise=0.5)
    static, _ = generate_dataset(EnvConfig(tier="static"), 400, seed=1002, action_noise=0.5)
    mcfg = MotionConfig(epochs=20, steps_per_epoch=400, batch_size=512, lr=2e-3,
                        lambdas=(1.0, 100.0, 1.0), seed=0)
    motion, _ = train_motion(easy, mcfg)
    bundle, _ = train_controller("tidal", easy + static, motion, ChunkingConfig(),
                                 PolicyTrainConfig(steps=8000, seed=0, log_every=8000))
    save_motion(motion, ART + "/motion")
    save_policy_bundle(bundle, ART + "/tidal")
motion = load_motion(ART + "/motion")
bundle = load_policy_bundle(ART + "/tidal")
ck = bundle.chunking

def run(tier, i, verbose_from=0.0):
    cfg = EnvConfig(tier=tier)
    noise = make_rng(5)
    state = env_reset(cfg, spawn_rng(0, 901, i))
    frames = {0: rasterize(state, cfg)}
    emb = mlp_forward(bundle.intent, intent_input(frames[0], tag_for_tier(cfg.tier)))
    k = 0
    print(f"=== {tier} ep {i}: ee {state.ee_pos.round(3)} target {state.target_pos.round(3)}")
    mind = 9.9
    while not state.is_terminal():
        t = state.time_step
        past = frames.get(t - motion.cfg.k_lag, np.zeros_like(frames[0]))
        diff = diff_frames(frames[t], past)
        m = motion_forward(motion.trunk, diff)
        aux = mlp_forward(motion.head, m)
        fused = fuse_state(proprio_vector(state), m, contact_state(state))
        chunk = euler_single_step(bundle.policy, noise, fused, emb, ck, bundle.action_scale)
        to_t = state.target_pos - state.ee_pos
        d = float(np.linalg.norm(to_t))
        mind = min(mind, d)
        h = chunk[0, :2]
        cos_direct = float(h @ to_t) / (np.linalg.norm(h) * d + 1e-12)
        aux_err = float(np.linalg.norm(aux[:2] - state.target_pos))
        if d < verbose_from or k % 25 == 0:
            print(f"  k={k:3d} t={t:3d} ee=({state.ee_pos[0]:.3f},{state.ee_pos[1]:.3f}) "
                  f"tgt=({state.target_pos[0]:.3f},{state.target_pos[1]:.3f}) d={d:.3f} "
                  f"cos_direct={cos_direct:+.2f} grip={chunk[0,2]:+.2f} aux_p_err={aux_err:.3f}")
        for j in range(ck.exec_steps):
            if state.is_terminal():
                break
            state = env_step(state, chunk[j], cfg, noise)
            frames[state.time_step] = rasterize(state, cfg)
        k += 1
        if k % ck.stages == 0 and not state.is_terminal():
            emb = mlp_forward(bundle.intent, intent_input(frames[state.time_step], tag_for_tier(cfg.tier)))
    print(f"  -> {state.phase} t={state.time_step} min_dist={mind:.3f}")

for i in range(3):
    run("static", i, verbose_from=0.16)
run("easy", 0, verbose_from=0.16)
