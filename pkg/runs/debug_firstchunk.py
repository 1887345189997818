import numpy as np
from dualfreq.env import EnvConfig, env_reset, rasterize, proprio_vector
from dualfreq.oracle import generate_dataset
from dualfreq.motion import MotionConfig, train_motion
from dualfreq.dataset import ChunkingConfig
from dualfreq.flow import PolicyTrainConfig, euler_single_step
from dualfreq.harness import train_controller
from dualfreq.intent import intent_input, tag_for_tier
from dualfreq.nets import mlp_forward
from dualfreq.motion import MOTION_DIM_DEFAULT
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
cos_all = []
for i in range(50):
    state = env_reset(cfg, spawn_rng(0, 901, i))
    grid = rasterize(state, cfg)
    emb = mlp_forward(bundle.intent, intent_input(grid, tag_for_tier(cfg.tier)))
    fused = np.concatenate([proprio_vector(state), np.zeros(MOTION_DIM_DEFAULT)])
    chunk = euler_single_step(bundle.policy, noise, fused, emb, ck, bundle.action_scale)
    to_t = state.target_pos - state.ee_pos
    h = chunk[:4, :2].mean(axis=0)
    cos_all.append(float(h @ to_t) / (np.linalg.norm(h) * np.linalg.norm(to_t) + 1e-12))
print(f"reset-state heading vs target direction: cos mean {np.mean(cos_all):.3f}, "
      f"min {np.min(cos_all):.3f}, frac>0.7 {np.mean(np.array(cos_all) > 0.7):.2f}")

# same check but conditioning taken from a real episode's own step 0
ep = easy[0]
emb = mlp_forward(bundle.intent, intent_input(ep.frame(0), tag_for_tier("easy")))
fused = np.concatenate([ep.proprio(0) if hasattr(ep, "proprio") else
                        np.array([ep.ee[0,0], ep.ee[0,1], ep.grip[0], ep.held[0]]),
                        np.zeros(MOTION_DIM_DEFAULT)])
chunk = euler_single_step(bundle.policy, noise, fused, emb, ck, bundle.action_scale)
to_t = ep.target[0] - ep.ee[0]
h = chunk[:4, :2].mean(axis=0)
print("episode-frame conditioning: cos",
      float(h @ to_t) / (np.linalg.norm(h) * np.linalg.norm(to_t) + 1e-12))
