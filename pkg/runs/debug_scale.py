import time
import numpy as np
from dualfreq.env import EnvConfig
from dualfreq.oracle import generate_dataset
from dualfreq.motion import MotionConfig, train_motion
from dualfreq.dataset import ChunkingConfig
from dualfreq.flow import PolicyTrainConfig
from dualfreq.harness import train_controller, eval_success_rate, get_mode
from dualfreq.scheduler import LatencyModel

t0 = time.time()
easy, _ = generate_dataset(EnvConfig(tier="easy"), 800, seed=1001)
static, _ = generate_dataset(EnvConfig(tier="static"), 400, seed=1002)
mcfg = MotionConfig(epochs=20, steps_per_epoch=400, batch_size=512, lr=2e-3,
                    lambdas=(1.0, 100.0, 1.0), seed=0)
motion, _ = train_motion(easy, mcfg)
print(f"[{time.time()-t0:.0f}s] data + motion ready", flush=True)

episodes = easy + static
lat = LatencyModel()
for steps in (8000, 16000):
    cfg = PolicyTrainConfig(steps=steps, seed=0, log_every=2000)
    for name in ("tidal", "baseline"):
        t1 = time.time()
        bundle, telem = train_controller(name, episodes, motion, ChunkingConfig(), cfg)
        msg = [f"[{time.time()-t0:.0f}s] {name}@{steps}: loss {telem['final_loss']:.3f} ({time.time()-t1:.0f}s train)"]
        for tier in ("easy", "static"):
            cell = eval_success_rate(name, bundle,
                                     motion if get_mode(name).motion_on else None,
                                     EnvConfig(tier=tier), lat, 30, seed=0)
            msg.append(f"{tier} {cell.successes}/{cell.n}")
        print("  ".join(msg), flush=True)
