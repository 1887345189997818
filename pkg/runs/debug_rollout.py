import numpy as np
from dualfreq.env import EnvConfig
from dualfreq.oracle import generate_dataset
from dualfreq.motion import MotionConfig, train_motion
from dualfreq.dataset import ChunkingConfig
from dualfreq.flow import PolicyTrainConfig
from dualfreq.harness import train_controller
from dualfreq.scheduler import LatencyModel, run_tidal_rollout
from dualfreq.sampling import spawn_rng

easy, _ = generate_dataset(EnvConfig(tier="easy"), 200, seed=1001)
static, _ = generate_dataset(EnvConfig(tier="static"), 100, seed=1002)
mcfg = MotionConfig(epochs=4, steps_per_epoch=200, batch_size=256, lr=2e-3,
                    lambdas=(1.0, 100.0, 1.0), seed=0)
motion, _ = train_motion(easy, mcfg)
bundle, _ = train_controller("tidal", easy + static, motion, ChunkingConfig(),
                             PolicyTrainConfig(steps=4000, seed=0, log_every=1000))

trace = run_tidal_rollout(bundle, motion, EnvConfig(tier="easy"), LatencyModel(),
                          spawn_rng(0, 901, 0), spawn_rng(0, 902, 0))
print({k: v for k, v in trace.meta.items() if k not in ("final_ee", "final_target")})
chunks = trace.of_kind("chunk")
for e in chunks[::10]:
    print(f"chunk {e.data['chunk_id']:3d} world {e.world:3d} stage {e.data['stage']} intent {e.data['intent_id']}")
print("final ee", trace.meta["final_ee"], "target", trace.meta["final_target"])
