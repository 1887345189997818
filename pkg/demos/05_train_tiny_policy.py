"""
Tiny end-to-end training run
============================

Generates a small demonstration set, pretrains the motion predictor, trains a
reduced interleaved-mode policy for a couple thousand steps, and rolls it out
under the latency model. Numbers here are for texture, not for the paper-scale
comparison (see demos/06 and the experiment harness for that); the point is
that every stage runs in about a minute end to end.

Run:  python3 demos/05_train_tiny_policy.py
"""

import time

import numpy as np

from dualfreq.dataset import ChunkingConfig
from dualfreq.env import EnvConfig
from dualfreq.flow import PolicyTrainConfig
from dualfreq.harness import eval_success_rate, train_controller
from dualfreq.motion import MotionConfig, motion_velocity_rmse, train_motion
from dualfreq.oracle import generate_dataset
from dualfreq.scheduler import LatencyModel, run_tidal_rollout
from dualfreq.sampling import spawn_rng

t0 = time.time()
easy, _ = generate_dataset(EnvConfig(tier="easy"), 150, seed=21, action_noise=0.5)
print(f"[{time.time()-t0:5.1f}s] {len(easy)} demonstration episodes")

mcfg = MotionConfig(epochs=4, steps_per_epoch=200, batch_size=256, lr=2e-3,
                    lambdas=(1.0, 100.0, 1.0), seed=0)
motion, losses = train_motion(easy, mcfg)
print(f"[{time.time()-t0:5.1f}s] motion predictor: epoch losses "
      f"{[round(x, 3) for x in losses]}, velocity rmse "
      f"{motion_velocity_rmse(motion, easy, 1000, seed=0):.4f}")

train = PolicyTrainConfig(steps=2500, hidden=(64, 64), embed_dim=16,
                          intent_hidden=(32,), seed=0, log_every=500)
bundle, telem = train_controller("tidal", easy, motion, ChunkingConfig(), train)
curve = ", ".join(f"{step}:{loss:.2f}" for step, loss in telem["loss_curve"])
print(f"[{time.time()-t0:5.1f}s] policy loss curve  {curve}")

lat = LatencyModel()
trace = run_tidal_rollout(bundle, motion, EnvConfig(tier="easy"), lat,
                          spawn_rng(0, 901, 0), spawn_rng(0, 902, 0))
m = trace.meta
print(f"one paused rollout: phase {m['phase']}, {m['n_intents']} intents, "
      f"{m['n_chunks']} chunks, {m['executed_steps']} steps, "
      f"{m['wall_ms']:.0f} ms simulated wall clock")

cell = eval_success_rate("tidal", bundle, motion, EnvConfig(tier="easy"), lat,
                         20, seed=0)
print(f"[{time.time()-t0:5.1f}s] 20-episode paused eval: {cell.successes}/20 "
      f"(tiny nets and tiny data; the full recipe does much better)")
