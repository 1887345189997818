"""
Scripted interception expert
============================

The demonstration data comes from a privileged controller that reads true
target kinematics and leads the intercept point. This script runs it on each
difficulty tier, then generates a small dataset and pokes at what an episode
file actually stores.

Run:  python3 demos/02_scripted_expert.py
"""

import tempfile

import numpy as np

from dualfreq.env import EnvConfig
from dualfreq.oracle import generate_dataset, load_dataset, run_oracle_episode
from dualfreq.sampling import spawn_rng

for tier in ("static", "easy", "hard"):
    cfg = EnvConfig(tier=tier)
    wins, lengths = 0, []
    for i in range(30):
        records, success = run_oracle_episode(cfg, spawn_rng(123, i))
        wins += success
        lengths.append(len(records))
    print(f"{tier:7s}: {wins}/30 success, episode length "
          f"{min(lengths)}..{max(lengths)} (mean {np.mean(lengths):.0f})")

print()
with tempfile.TemporaryDirectory() as tmp:
    episodes, manifest = generate_dataset(EnvConfig(tier="easy"), 20, seed=5,
                                          out_dir=tmp)
    reloaded, manifest2 = load_dataset(tmp)
    print(f"dataset: {manifest['n_episodes']} episodes from "
          f"{manifest['attempts']} attempts, tier {manifest['tier']}")
    ep = episodes[3]
    same = np.array_equal(reloaded[3].ee, ep.ee)
    print(f"episode 3: {len(ep)} steps, round-trips from disk: {same}")
    print(f"  step 50 ee={ep.ee[50].round(3)} target={ep.target[50].round(3)} "
          f"action={ep.actions[50].round(4)}")
    # grid frames are not stored; they rebuild deterministically on demand
    fa, fb = ep.frame(50), ep.frame(50)
    print(f"  frame(50) rebuilt twice, identical: {np.array_equal(fa, fb)}, "
          f"nonzero cells: {int(np.count_nonzero(fa))}")
