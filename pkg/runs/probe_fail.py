import sys
import numpy as np
from dualfreq.env import EnvConfig
from dualfreq.motion import load_motion
from dualfreq.flow import load_policy_bundle
from dualfreq.harness import get_mode, run_controller_episode, LatencyModel

ART = sys.argv[1]
TIER = sys.argv[2] if len(sys.argv) > 2 else "easy"
N = int(sys.argv[3]) if len(sys.argv) > 3 else 40
motion = load_motion(ART + "/motion")
bundle = load_policy_bundle(ART + "/tidal")
mode = get_mode("tidal")
cfg = EnvConfig(tier=TIER)
buckets = {"success": 0, "never_held": 0, "holding_at_end": 0, "dropped_out": 0}
for i in range(N):
    tr = run_controller_episode(mode, bundle, motion, cfg, LatencyModel(), 0, i)
    held_any = any(s["held"] for s in tr.steps)
    if tr.success:
        buckets["success"] += 1
    elif not held_any:
        buckets["never_held"] += 1
    elif tr.steps[-1]["held"]:
        buckets["holding_at_end"] += 1
    else:
        buckets["dropped_out"] += 1
print(TIER, buckets)
