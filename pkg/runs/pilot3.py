import sys, time
import numpy as np
from dualfreq.env import EnvConfig
from dualfreq.oracle import generate_dataset
from dualfreq.motion import MotionConfig, train_motion, motion_velocity_rmse
from dualfreq.dataset import ChunkingConfig
from dualfreq.flow import PolicyTrainConfig
from dualfreq.harness import train_controller, eval_success_rate, LatencyModel

NOISE = float(sys.argv[1]) if len(sys.argv) > 1 else 0.5
RSTART = float(sys.argv[2]) if len(sys.argv) > 2 else 0.5
STEPS = int(sys.argv[3]) if len(sys.argv) > 3 else 8000
t0 = time.time()
easy, _ = generate_dataset(EnvConfig(tier="easy"), 800, seed=1001,
                           action_noise=NOISE, random_start=RSTART)
static, _ = generate_dataset(EnvConfig(tier="static"), 400, seed=1002,
                             action_noise=NOISE, random_start=RSTART)
mcfg = MotionConfig(epochs=20, steps_per_epoch=400, batch_size=512, lr=2e-3,
                    lambdas=(1.0, 100.0, 1.0), seed=0)
motion, _ = train_motion(easy, mcfg)
rmse = motion_velocity_rmse(motion, easy)
print(f"[{time.time()-t0:.0f}s] noise={NOISE} rstart={RSTART} data+motion ready (rmse {rmse:.4f})", flush=True)

data = easy + static
for mode in ("tidal", "baseline"):
    bundle, telem = train_controller(mode, data, motion, ChunkingConfig(),
                                     PolicyTrainConfig(steps=STEPS, seed=0, log_every=STEPS))
    res = {}
    for tier in ("easy", "static"):
        r = eval_success_rate(mode, bundle, motion, EnvConfig(tier=tier),
                              LatencyModel(), 40, 0, paused=True)
        res[tier] = r.successes
    print(f"[{time.time()-t0:.0f}s] {mode}@{STEPS}: loss {telem['final_loss']:.3f}  "
          f"easy {res['easy']}/40  static {res['static']}/40", flush=True)
