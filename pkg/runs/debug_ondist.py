import numpy as np
from dualfreq.env import EnvConfig
from dualfreq.oracle import generate_dataset
from dualfreq.motion import MotionConfig, train_motion
from dualfreq.dataset import ChunkingConfig, batch_iter
from dualfreq.flow import PolicyTrainConfig, euler_single_step, multi_step_solve, _fused_from_batch, decode_chunk
from dualfreq.harness import train_controller, mode_chunking, get_mode
from dualfreq.nets import mlp_forward
from dualfreq.sampling import spawn_rng, make_rng

easy, _ = generate_dataset(EnvConfig(tier="easy"), 200, seed=1001)
static, _ = generate_dataset(EnvConfig(tier="static"), 100, seed=1002)
mcfg = MotionConfig(epochs=4, steps_per_epoch=200, batch_size=256, lr=2e-3,
                    lambdas=(1.0, 100.0, 1.0), seed=0)
motion, _ = train_motion(easy, mcfg)
episodes = easy + static
ck = ChunkingConfig()
cfg = PolicyTrainConfig(steps=4000, seed=0, log_every=1000)
bundle, telem = train_controller("tidal", episodes, motion, ck, cfg)
print("final loss", telem["final_loss"])

mode = get_mode("tidal")
mck = mode_chunking(mode, ck)
rng = make_rng(42)
batch = next(batch_iter(episodes, mck, motion.cfg, rng, 64))
fused, gate, _ = _fused_from_batch(batch, motion, True, 8, False)
emb = mlp_forward(bundle.intent, batch.macro_in)
noise = spawn_rng(0, 55)
errs, gerrs = [], []
for solver, n in (("single", 1), ("multi", 4)):
    pred = np.empty_like(batch.actions)
    for i in range(len(batch)):
        if n == 1:
            pred[i] = euler_single_step(bundle.policy, noise, fused[i], emb[i], ck, bundle.action_scale)
        else:
            pred[i] = multi_step_solve(bundle.policy, noise, fused[i], emb[i], ck, bundle.action_scale, n)
    xy_err = np.abs(pred[..., :2] - batch.actions[..., :2]).mean()
    # heading agreement on the near steps that actually execute
    cos = []
    for i in range(len(batch)):
        for j in range(4):
            a, b = pred[i, j, :2], batch.actions[i, j, :2]
            na, nb = np.linalg.norm(a), np.linalg.norm(b)
            if na > 1e-9 and nb > 1e-9:
                cos.append(float(a @ b) / (na * nb))
    grip_agree = np.mean(np.sign(pred[..., 2]) == np.sign(batch.actions[..., 2]))
    print(f"{solver}: |xy err| {xy_err:.5f} (budget 0.003), near-step heading cos "
          f"{np.mean(cos):.3f}, grip sign agree {grip_agree:.3f}")
