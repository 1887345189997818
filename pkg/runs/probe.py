import os, sys, time
import numpy as np
from dualfreq.env import (EnvConfig, WorldState, env_reset, env_step, rasterize,
                          proprio_vector, contact_state)
from dualfreq.oracle import generate_dataset, oracle_action
from dualfreq.motion import (MotionConfig, train_motion, motion_velocity_rmse,
                             diff_frames, fuse_state, motion_forward,
                             save_motion, load_motion)
from dualfreq.dataset import ChunkingConfig
from dualfreq.flow import (PolicyTrainConfig, euler_single_step,
                           save_policy_bundle, load_policy_bundle)
from dualfreq.harness import train_controller, eval_success_rate, LatencyModel
from dualfreq.intent import intent_input, tag_for_tier
from dualfreq.nets import mlp_forward
from dualfreq.sampling import spawn_rng, make_rng

ART = sys.argv[1]
NOISE = float(sys.argv[2]) if len(sys.argv) > 2 else 0.5
RSTART = float(sys.argv[3]) if len(sys.argv) > 3 else 0.5
NEAR = float(sys.argv[4]) if len(sys.argv) > 4 else 0.0
STEPS = int(sys.argv[5]) if len(sys.argv) > 5 else 24000
PAD = int(sys.argv[6]) if len(sys.argv) > 6 else 27
t0 = time.time()

if not os.path.isdir(ART):
    easy, _ = generate_dataset(EnvConfig(tier="easy"), 800, seed=1001,
                               action_noise=NOISE, random_start=RSTART, near_start=NEAR,
                               pad_terminal=PAD)
    static, _ = generate_dataset(EnvConfig(tier="static"), 400, seed=1002,
                                 action_noise=NOISE, random_start=RSTART, near_start=NEAR,
                                 pad_terminal=PAD)
    mcfg = MotionConfig(epochs=20, steps_per_epoch=400, batch_size=512, lr=2e-3,
                        lambdas=(1.0, 100.0, 1.0), seed=0)
    motion, _ = train_motion(easy, mcfg)
    print(f"[{time.time()-t0:.0f}s] data+motion (rmse {motion_velocity_rmse(motion, easy):.4f})", flush=True)
    bundle, telem = train_controller("tidal", easy + static, motion, ChunkingConfig(),
                                     PolicyTrainConfig(steps=STEPS, seed=0, log_every=2000))
    curve = " ".join(f"{l:.2f}" for _, l in telem["loss_curve"])
    print(f"[{time.time()-t0:.0f}s] tidal@{STEPS} loss curve: {curve}", flush=True)
    save_motion(motion, ART + "/motion")
    save_policy_bundle(bundle, ART + "/tidal")
motion = load_motion(ART + "/motion")
bundle = load_policy_bundle(ART + "/tidal")
ck = bundle.chunking

for tier in ("easy", "static"):
    r = eval_success_rate("tidal", bundle, motion, EnvConfig(tier=tier),
                          LatencyModel(), 40, 0, paused=True)
    print(f"[{time.time()-t0:.0f}s] eval paused {tier}: {r.successes}/40", flush=True)

cfg = EnvConfig(tier="static")
g0 = np.zeros((cfg.grid_resolution, cfg.grid_resolution))
m0 = motion_forward(motion.trunk, diff_frames(g0, g0))
rng = make_rng(11)

print("\n--- synthetic anchor probe: fresh anchor, silent motion, static tier ---")
print("dist   mean_cos  min_cos  P(grip+)   (over 4 targets x 8 bearings x 3 draws)")
for d in (0.20, 0.125, 0.08, 0.05, 0.03, 0.015):
    cs, gp = [], []
    for tpos in ((0.64, 0.64), (0.41, 0.58), (0.70, 0.47), (0.33, 0.72)):
        for b in range(8):
            th = 2 * np.pi * b / 8
            ee = np.array(tpos) + d * np.array([np.cos(th), np.sin(th)])
            if not ((0.02 <= ee) & (ee <= 0.98)).all():
                continue
            st = WorldState(time_step=50, ee_pos=ee, gripper_closed=False,
                            target_pos=np.array(tpos), target_vel=np.zeros(2),
                            held=False, phase="approach")
            emb = mlp_forward(bundle.intent, intent_input(rasterize(st, cfg), tag_for_tier("static")))
            fused = fuse_state(proprio_vector(st), m0, contact_state(st))
            for _ in range(3):
                chunk = euler_single_step(bundle.policy, rng, fused, emb, ck, bundle.action_scale)
                h = chunk[0, :2]
                to_t = st.target_pos - ee
                cs.append(float(h @ to_t) / (np.linalg.norm(h) * np.linalg.norm(to_t) + 1e-12))
                gp.append(chunk[0, 2] > 0)
    print(f"{d:.3f}  {np.mean(cs):+.3f}   {np.min(cs):+.3f}   {np.mean(gp):.2f}")

print("\n--- post-miss probe: ee sailed 'beyond' target, must turn back ---")
for over in (0.05, 0.10, 0.20):
    cs = []
    for tpos in ((0.64, 0.64), (0.41, 0.58), (0.70, 0.47)):
        for b in range(8):
            th = 2 * np.pi * b / 8
            u = np.array([np.cos(th), np.sin(th)])
            ee = np.array(tpos) + over * u
            if not ((0.02 <= ee) & (ee <= 0.98)).all():
                continue
            st = WorldState(time_step=80, ee_pos=ee, gripper_closed=True,
                            target_pos=np.array(tpos), target_vel=np.zeros(2),
                            held=False, phase="approach")
            emb = mlp_forward(bundle.intent, intent_input(rasterize(st, cfg), tag_for_tier("static")))
            fused = fuse_state(proprio_vector(st), m0, contact_state(st))
            chunk = euler_single_step(bundle.policy, rng, fused, emb, ck, bundle.action_scale)
            h = chunk[0, :2]
            cs.append(float(h @ (-u)) / (np.linalg.norm(h) + 1e-12))
    print(f"overshoot {over:.2f}: mean_cos_back {np.mean(cs):+.3f}  min {np.min(cs):+.3f}")

print("\n--- closed-loop static trace (ep 2) ---")
state = env_reset(cfg, spawn_rng(0, 901, 2))
frames = {0: rasterize(state, cfg)}
emb = mlp_forward(bundle.intent, intent_input(frames[0], tag_for_tier("static")))
noise = make_rng(5)
k = 0
mind = 9.9
while not state.is_terminal():
    t = state.time_step
    past = frames.get(t - motion.cfg.k_lag, g0)
    m = motion_forward(motion.trunk, diff_frames(frames[t], past))
    fused = fuse_state(proprio_vector(state), m, contact_state(state))
    chunk = euler_single_step(bundle.policy, noise, fused, emb, ck, bundle.action_scale)
    to_t = state.target_pos - state.ee_pos
    d = float(np.linalg.norm(to_t))
    mind = min(mind, d)
    if d < 0.14 or k % 30 == 0:
        h = chunk[0, :2]
        cd = float(h @ to_t) / (np.linalg.norm(h) * d + 1e-12)
        print(f"  k={k:3d} t={t:3d} d={d:.3f} cos={cd:+.2f} grip={chunk[0,2]:+.2f} "
              f"held={state.held:d}")
    for j in range(ck.exec_steps):
        if state.is_terminal():
            break
        state = env_step(state, chunk[j], cfg, noise)
        frames[state.time_step] = rasterize(state, cfg)
    k += 1
    if k % ck.stages == 0 and not state.is_terminal():
        emb = mlp_forward(bundle.intent, intent_input(frames[state.time_step], tag_for_tier("static")))
print(f"  -> {state.phase} t={state.time_step} min_dist={mind:.3f}")
