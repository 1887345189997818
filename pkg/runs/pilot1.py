import sys, time
import numpy as np
from dualfreq.env import EnvConfig
from dualfreq.oracle import generate_dataset
from dualfreq.motion import MotionConfig, train_motion, motion_velocity_rmse
from dualfreq.dataset import ChunkingConfig
from dualfreq.flow import PolicyTrainConfig
from dualfreq.harness import (mode_chunking, mode_train_config, get_mode,
                              train_controller, eval_success_rate)
from dualfreq.scheduler import LatencyModel

t_start = time.time()
def log(msg):
    print(f"[{time.time()-t_start:7.1f}s] {msg}", flush=True)

easy, _ = generate_dataset(EnvConfig(tier="easy"), 800, seed=1001)
static, _ = generate_dataset(EnvConfig(tier="static"), 400, seed=1002)
log(f"data: {len(easy)} easy + {len(static)} static")

mcfg = MotionConfig(epochs=20, steps_per_epoch=400, batch_size=512, lr=2e-3,
                    lambdas=(1.0, 100.0, 1.0), seed=0)
motion, _ = train_motion(easy, mcfg)
log(f"motion trained, rmse {motion_velocity_rmse(motion, easy, 2000, seed=0):.5f}")

episodes = easy + static
ck = ChunkingConfig()
base_train = PolicyTrainConfig(steps=4000, seed=0, log_every=500)
lat = LatencyModel()
bundles = {}
for name in ("tidal", "baseline"):
    t0 = time.time()
    bundle, telem = train_controller(name, episodes, motion, ck, base_train)
    log(f"{name}: trained {base_train.steps} steps in {time.time()-t0:.0f}s, "
        f"final loss {telem['final_loss']:.4f}, curve {[f'{l:.3f}' for _, l in telem['loss_curve']]}")
    bundles[name] = bundle

for name in ("tidal", "baseline"):
    for tier in ("easy", "static"):
        t0 = time.time()
        cell = eval_success_rate(name, bundles[name],
                                 motion if get_mode(name).motion_on else None,
                                 EnvConfig(tier=tier), lat, 50, seed=0)
        log(f"{name}/{tier} paused: {cell.successes}/{cell.n} = {cell.rate:.3f} "
            f"(exec {cell.mean_exec_steps:.0f}, hz {cell.mean_hz:.2f}) [{time.time()-t0:.0f}s]")
