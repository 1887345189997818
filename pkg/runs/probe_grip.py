import sys
import numpy as np
from dualfreq.env import EnvConfig
from dualfreq.oracle import generate_dataset
from dualfreq.motion import load_motion, diff_frames, fuse_state, motion_forward
from dualfreq.dataset import ChunkingConfig, build_sample
from dualfreq.flow import load_policy_bundle, euler_single_step, vf_forward, sample_gaussian_chunk
from dualfreq.nets import mlp_forward
from dualfreq.sampling import make_rng, spawn_rng

ART = sys.argv[1]
motion = load_motion(ART + "/motion")
bundle = load_policy_bundle(ART + "/tidal")
ck = bundle.chunking

easy, _ = generate_dataset(EnvConfig(tier="easy"), 800, seed=1001,
                           action_noise=0.5, random_start=0.35, near_start=0.25)
static, _ = generate_dataset(EnvConfig(tier="static"), 400, seed=1002,
                             action_noise=0.5, random_start=0.35, near_start=0.25)
eps = easy + static
rng = make_rng(3)

# label stats at chunk index 0
lab_pos_flag0 = lab_pos_flag1 = lab_neg_flag0 = lab_neg_flag1 = 0
buckets = {k: [] for k in ("pos/flag0", "pos/flag1", "neg/flag0", "neg/flag1")}
n = 0
while n < 4000:
    ep = eps[rng.integers(0, len(eps))]
    if len(ep) < ck.segment_len:
        continue
    anchor = int(rng.integers(0, len(ep) - ck.segment_len + 1))
    stage = int(rng.integers(0, ck.stages))
    s = build_sample(ep, anchor, stage, ck, motion)
    t_exec = anchor + stage * ck.exec_steps
    if ep.held[t_exec]:
        continue  # approach-phase grip behavior only
    n += 1
    lab = "pos" if s.actions[0, 2] > 0 else "neg"
    flag = "flag1" if ep.grip[t_exec] else "flag0"
    emb = mlp_forward(bundle.intent, s.macro_input)
    chunk = euler_single_step(bundle.policy, rng, s.fused, emb, ck, bundle.action_scale)
    buckets[f"{lab}/{flag}"].append(chunk[0, 2])

print("approach-phase chunk[0] grip prediction by (label sign, gripper flag):")
for k, v in buckets.items():
    if v:
        v = np.array(v)
        print(f"  {k:10s} n={len(v):4d}  mean={v.mean():+.3f}  P(pred>0)={np.mean(v > 0):.3f}")
    else:
        print(f"  {k:10s} n=0")
