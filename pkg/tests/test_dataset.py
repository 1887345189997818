"""Misaligned sampling: segment bounds, stage draws, batch packing."""

import numpy as np
import pytest

from dualfreq.dataset import (ChunkingConfig, batch_iter, build_sample,
                              sample_latency_stage, segment_length)
from dualfreq.env import EnvConfig
from dualfreq.errors import ConfigurationError, SegmentOverrunError
from dualfreq.intent import intent_input, tag_for_tier
from dualfreq.motion import (MotionConfig, MotionPredictor, diff_frames,
                             motion_forward)
from dualfreq.nets import mlp_init
from dualfreq.oracle import generate_dataset
from dualfreq.sampling import make_rng, spawn_rng


@pytest.fixture(scope="module")
def easy_eps():
    eps, _ = generate_dataset(EnvConfig(tier="easy"), 6, seed=3)
    return eps


@pytest.fixture(scope="module")
def static_eps():
    eps, _ = generate_dataset(EnvConfig(tier="static"), 2, seed=5)
    return eps


@pytest.fixture(scope="module")
def rand_motion():
    cfg = MotionConfig()
    rng = make_rng(99)
    return MotionPredictor(trunk=mlp_init(cfg.trunk_dims(), rng),
                           head=mlp_init(cfg.head_dims(), rng), cfg=cfg)


def test_segment_length_values():
    assert segment_length(16, 4, 4) == 28
    assert segment_length(16, 4, 1) == 16
    assert segment_length(8, 2, 3) == 12
    assert ChunkingConfig().segment_len == 28


def test_segment_length_rejects_nonpositive():
    with pytest.raises(ConfigurationError):
        segment_length(0, 4, 4)
    with pytest.raises(ConfigurationError):
        segment_length(16, 4, 0)


def test_chunking_validation():
    with pytest.raises(ConfigurationError):
        ChunkingConfig(horizon=2, exec_steps=4)
    with pytest.raises(ConfigurationError):
        ChunkingConfig(weight_near=0.0)


def test_weight_vector_layout():
    w = ChunkingConfig().weights()
    assert w.shape == (16,)
    assert np.array_equal(w[:4], np.full(4, 2.0))
    assert np.array_equal(w[4:], np.full(12, 1.0))


def test_stage_sampling_uniform_and_degenerate():
    rng = make_rng(0)
    draws = np.array([sample_latency_stage(rng, 4) for _ in range(40000)])
    assert set(np.unique(draws)) == {0, 1, 2, 3}
    freq = np.bincount(draws, minlength=4) / draws.size
    assert np.all(np.abs(freq - 0.25) < 0.02)
    assert all(sample_latency_stage(rng, 1) == 0 for _ in range(50))
    with pytest.raises(ConfigurationError):
        sample_latency_stage(rng, 0)


def test_build_sample_stage_zero_is_synchronous(easy_eps, rand_motion):
    ep = easy_eps[0]
    ck = ChunkingConfig()
    s = build_sample(ep, 5, 0, ck, rand_motion)
    assert s.stage == 0 and s.anchor == 5
    assert np.array_equal(s.macro_input, intent_input(ep.frame(5), tag_for_tier("easy")))
    assert np.array_equal(s.fused[:4], ep.proprio(5))
    assert np.array_equal(s.actions, ep.actions[5:21])


def test_build_sample_stage_three_shifts_fast_view(easy_eps, rand_motion):
    ep = easy_eps[0]
    ck = ChunkingConfig()
    s = build_sample(ep, 5, 3, ck, rand_motion)
    t_exec = 5 + 3 * 4
    # macro view stays frozen at the anchor step
    assert np.array_equal(s.macro_input, intent_input(ep.frame(5), tag_for_tier("easy")))
    assert np.array_equal(s.fused[:4], ep.proprio(t_exec))
    assert np.array_equal(s.actions, ep.actions[t_exec: t_exec + 16])
    if not ep.contact[t_exec]:
        diff = diff_frames(ep.frame(t_exec), ep.frame(t_exec - 4))
        assert np.array_equal(s.fused[4:], motion_forward(rand_motion.trunk, diff))


def test_build_sample_contact_zeroes_motion(easy_eps, rand_motion):
    ep = easy_eps[0]
    held_steps = np.where(ep.contact == 1)[0]
    anchors = [t for t in held_steps if t + ChunkingConfig().segment_len <= len(ep)]
    assert anchors, "episode never holds the target early enough"
    s = build_sample(ep, int(anchors[0]), 0, ChunkingConfig(), rand_motion)
    assert np.array_equal(s.fused[4:], np.zeros(8))


def test_build_sample_motion_off_gives_zero_block(easy_eps, rand_motion):
    ep = easy_eps[0]
    s = build_sample(ep, 2, 1, ChunkingConfig(), rand_motion, motion_on=False)
    assert np.array_equal(s.fused[4:], np.zeros(8))
    s2 = build_sample(ep, 2, 1, ChunkingConfig(), None)
    assert np.array_equal(s2.fused[4:], np.zeros(8))


def test_build_sample_bounds(easy_eps, rand_motion):
    ep = easy_eps[0]
    ck = ChunkingConfig()
    build_sample(ep, len(ep) - ck.segment_len, 0, ck, rand_motion)
    with pytest.raises(SegmentOverrunError):
        build_sample(ep, len(ep) - ck.segment_len + 1, 0, ck, rand_motion)
    with pytest.raises(SegmentOverrunError):
        build_sample(ep, -1, 0, ck, rand_motion)
    with pytest.raises(ConfigurationError):
        build_sample(ep, 0, 4, ck, rand_motion)
    with pytest.raises(ConfigurationError):
        build_sample(ep, 0, -1, ck, rand_motion)


def test_batch_iter_deterministic(easy_eps):
    ck = ChunkingConfig()
    mcfg = MotionConfig()
    b1 = next(batch_iter(easy_eps, ck, mcfg, spawn_rng(7, 1), 32))
    b2 = next(batch_iter(easy_eps, ck, mcfg, spawn_rng(7, 1), 32))
    for name in ("macro_in", "s_prop", "diffs", "contact", "actions", "stages", "anchors"):
        assert np.array_equal(getattr(b1, name), getattr(b2, name)), name


def test_batch_iter_stage_modes(easy_eps):
    ck = ChunkingConfig()
    mcfg = MotionConfig()
    it = batch_iter(easy_eps, ck, mcfg, spawn_rng(7, 2), 256)
    stages = np.concatenate([next(it).stages for _ in range(8)])
    freq = np.bincount(stages, minlength=4) / stages.size
    assert np.all(np.abs(freq - 0.25) < 0.05)
    it0 = batch_iter(easy_eps, ck, mcfg, spawn_rng(7, 3), 64, stage_sampling="zero")
    assert np.array_equal(next(it0).stages, np.zeros(64, dtype=np.int64))
    with pytest.raises(ConfigurationError):
        next(batch_iter(easy_eps, ck, mcfg, spawn_rng(7, 4), 8, stage_sampling="latest"))


def test_batch_rows_match_build_sample(easy_eps, static_eps, rand_motion):
    eps = list(easy_eps) + list(static_eps)
    ck = ChunkingConfig()
    batch = next(batch_iter(eps, ck, rand_motion.cfg, spawn_rng(7, 5), 48))
    for j in range(0, 48, 7):
        ep = eps[int(batch.episode_idx[j])]
        s = build_sample(ep, int(batch.anchors[j]), int(batch.stages[j]), ck, rand_motion)
        assert np.array_equal(batch.macro_in[j], s.macro_input)
        assert np.array_equal(batch.actions[j], s.actions)
        assert np.array_equal(batch.s_prop[j], s.fused[:4])
        gate = 1.0 - batch.contact[j]
        fused_motion = motion_forward(rand_motion.trunk, batch.diffs[j]) * gate
        assert np.allclose(fused_motion, s.fused[4:], rtol=0, atol=1e-15)


def test_batch_iter_rejects_short_episodes(easy_eps):
    ck = ChunkingConfig()
    with pytest.raises(ConfigurationError):
        next(batch_iter(easy_eps, ck, MotionConfig(), make_rng(0), 0))
    long_ck = ChunkingConfig(horizon=600, exec_steps=4, stages=4)
    with pytest.raises(ConfigurationError):
        next(batch_iter(easy_eps, long_ck, MotionConfig(), make_rng(0), 4))
