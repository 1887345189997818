"""
Temporally misaligned training views
====================================

A training sample deliberately reproduces the timing skew the controller will
face at deployment: the macro observation is frozen at an anchor step while
the fused state and the action window shift forward by k fast-loop periods.
This script builds the four stage views of one anchor side by side, then
checks the stage histogram a batch sampler actually draws.

Run:  python3 demos/04_misaligned_batches.py
"""

import numpy as np

from dualfreq.dataset import ChunkingConfig, batch_iter, build_sample, segment_length
from dualfreq.env import EnvConfig
from dualfreq.motion import MotionConfig
from dualfreq.oracle import generate_dataset
from dualfreq.sampling import make_rng

ck = ChunkingConfig()
print(f"horizon {ck.horizon}, {ck.exec_steps} executed per solve, {ck.stages} stages "
      f"-> segment length {segment_length(ck.horizon, ck.exec_steps, ck.stages)}")
print(f"loss weights along the horizon: {ck.weights().tolist()}\n")

episodes, _ = generate_dataset(EnvConfig(tier="easy"), 5, seed=11)
ep = episodes[0]
anchor = 40
mcfg = MotionConfig()
for stage in range(ck.stages):
    s = build_sample(ep, anchor, stage, ck, motion=None, motion_on=False)
    t_exec = anchor + stage * ck.exec_steps
    same_macro = np.array_equal(s.macro_input[:256], ep.frame(anchor).ravel())
    print(f"stage {stage}: conditions at step {t_exec:2d}, actions cover "
          f"[{t_exec}, {t_exec + ck.horizon}), proprio ee={s.fused[:2].round(3)}, "
          f"macro frozen at anchor: {same_macro}")
    assert np.array_equal(s.actions, ep.actions[t_exec:t_exec + ck.horizon])

print("\nstage draw histogram over one epoch of batches")
rng = make_rng(3)
counts = np.zeros(ck.stages, int)
for batch in [next(batch_iter(episodes, ck, mcfg, rng, 256)) for _ in range(40)]:
    counts += np.bincount(batch.stages, minlength=ck.stages)
print(f"  uniform sampling: {counts.tolist()} (target {counts.sum() // 4} each)")
rng = make_rng(3)
batch = next(batch_iter(episodes, ck, mcfg, rng, 256, stage_sampling="zero"))
print(f"  zero sampling:    every stage is {set(batch.stages.tolist())} "
      f"(synchronous conditioning, the batch baseline's diet)")
