import numpy as np
from dualfreq.env import EnvConfig
from dualfreq.oracle import generate_dataset
from dualfreq.motion import MotionConfig, train_motion
from dualfreq.dataset import ChunkingConfig, build_sample
from dualfreq.flow import PolicyTrainConfig, euler_single_step, _fused_from_batch
from dualfreq.harness import train_controller
from dualfreq.nets import mlp_forward
from dualfreq.sampling import make_rng

easy, _ = generate_dataset(EnvConfig(tier="easy"), 800, seed=1001)
static, _ = generate_dataset(EnvConfig(tier="static"), 400, seed=1002)
mcfg = MotionConfig(epochs=20, steps_per_epoch=400, batch_size=512, lr=2e-3,
                    lambdas=(1.0, 100.0, 1.0), seed=0)
motion, _ = train_motion(easy, mcfg)
ck = ChunkingConfig()
bundle, _ = train_controller("tidal", easy + static, motion, ck,
                             PolicyTrainConfig(steps=8000, seed=0, log_every=4000))

# held-out easy episodes, stage-0 samples across the approach; bucket by true distance
held, _ = generate_dataset(EnvConfig(tier="easy"), 60, seed=777)
rng = make_rng(1)
noise = make_rng(2)
bins = [0.0, 0.02, 0.04, 0.06, 0.09, 0.13, 0.2, 1.0]
pred_pos = [[] for _ in bins[:-1]]
data_pos = [[] for _ in bins[:-1]]
for ep in held:
    L = ck.segment_len
    for anchor in range(0, len(ep) - L, 3):
        stage = int(rng.integers(0, 4))
        t = anchor + stage * ck.exec_steps
        if ep.held[t]:
            continue
        d = float(np.linalg.norm(ep.target[t] - ep.ee[t]))
        s = build_sample(ep, anchor, stage, ck, motion, motion_on=True)
        emb = mlp_forward(bundle.intent, s.macro_input)
        chunk = euler_single_step(bundle.policy, noise, s.fused, emb, ck, bundle.action_scale)
        for lo, hi, accp, accd in zip(bins[:-1], bins[1:], pred_pos, data_pos):
            if lo <= d < hi:
                accp.append(chunk[0, 2] > 0)
                accd.append(ep.actions[t, 2] > 0)
print("true dist     n    P(data grip+)  P(pred grip+)")
for (lo, hi, accp, accd) in zip(bins[:-1], bins[1:], pred_pos, data_pos):
    if accp:
        print(f"[{lo:.2f},{hi:.2f})  {len(accp):5d}   {np.mean(accd):.3f}          {np.mean(accp):.3f}")
