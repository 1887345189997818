import sys, time
import numpy as np
from dualfreq.env import EnvConfig
from dualfreq.oracle import generate_dataset
from dualfreq.motion import MotionConfig, train_motion, motion_velocity_rmse
from dualfreq.dataset import ChunkingConfig
from dualfreq.flow import PolicyTrainConfig
from dualfreq.harness import train_controller, eval_success_rate, get_mode
from dualfreq.scheduler import LatencyModel

NOISE = float(sys.argv[1]) if len(sys.argv) > 1 else 0.5
STEPS = int(sys.argv[2]) if len(sys.argv) > 2 else 8000
t0 = time.time()
easy, _ = generate_dataset(EnvConfig(tier="easy"), 800, seed=1001, action_noise=NOISE)
static, _ = generate_dataset(EnvConfig(tier="static"), 400, seed=1002, action_noise=NOISE)
mcfg = MotionConfig(epochs=20, steps_per_epoch=400, batch_size=512, lr=2e-3,
                    lambdas=(1.0, 100.0, 1.0), seed=0)
motion, _ = train_motion(easy, mcfg)
print(f"[{time.time()-t0:.0f}s] noise={NOISE} data+motion ready "
      f"(rmse {motion_velocity_rmse(motion, easy, 2000, seed=0):.4f})", flush=True)

episodes = easy + static
lat = LatencyModel()
cfg = PolicyTrainConfig(steps=STEPS, seed=0, log_every=4000)
for name in ("tidal", "baseline"):
    bundle, telem = train_controller(name, episodes, motion, ChunkingConfig(), cfg)
    msg = [f"[{time.time()-t0:.0f}s] {name}@{STEPS}: loss {telem['final_loss']:.3f}"]
    for tier in ("easy", "static"):
        cell = eval_success_rate(name, bundle,
                                 motion if get_mode(name).motion_on else None,
                                 EnvConfig(tier=tier), lat, 40, seed=0)
        msg.append(f"{tier} {cell.successes}/{cell.n}")
    print("  ".join(msg), flush=True)
