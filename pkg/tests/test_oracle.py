"""Scripted expert behavior and dataset generation contracts."""

import numpy as np
import pytest

from dualfreq.env import EnvConfig, WorldState, env_reset, env_step
from dualfreq.errors import GenerationError, ProtocolError
from dualfreq.oracle import (Episode, episode_from_records, generate_dataset,
                             load_dataset, oracle_action, run_oracle_episode)
from dualfreq.sampling import make_rng, spawn_rng


def test_static_far_target_aims_exactly_at_it():
    cfg = EnvConfig(tier="static")
    st = env_reset(cfg, make_rng(0))
    st.target_pos = np.array([0.9, 0.9])
    st.target_vel = np.zeros(2)
    a = oracle_action(st, cfg)
    direction = a[:2] / np.linalg.norm(a[:2])
    want = (st.target_pos - st.ee_pos) / np.linalg.norm(st.target_pos - st.ee_pos)
    assert np.allclose(direction, want, atol=1e-12)
    assert np.hypot(a[0], a[1]) == pytest.approx(cfg.max_step_displacement, rel=1e-12)
    assert a[2] == -1.0


def test_moving_target_gets_lead():
    cfg = EnvConfig()
    st = env_reset(cfg, make_rng(0))
    st.ee_pos = np.array([0.5, 0.1])
    st.target_pos = np.array([0.5, 0.5])
    st.target_vel = np.array([0.05, 0.0])
    a = oracle_action(st, cfg)
    # aim point sits ahead of the target along +x, so the action tilts +x
    assert a[0] > 0.0 and a[1] > 0.0


def test_carry_opens_inside_goal():
    cfg = EnvConfig()
    goal = np.asarray(cfg.goal_center)
    st = env_reset(cfg, make_rng(0))
    st.phase = "carry"
    st.held = True
    st.grasp_offset = np.array([0.0, 0.01])
    st.ee_pos = goal - [0.0, 0.01]
    st.target_pos = goal.copy()
    a = oracle_action(st, cfg)
    assert a[2] == -1.0
    far = env_reset(cfg, make_rng(0))
    far.phase = "carry"
    far.held = True
    far.grasp_offset = np.array([0.0, 0.01])
    far.ee_pos = np.array([0.2, 0.2])
    far.target_pos = far.ee_pos + far.grasp_offset
    assert oracle_action(far, cfg)[2] == 1.0


def test_terminal_state_rejected():
    cfg = EnvConfig()
    st = env_reset(cfg, make_rng(0))
    st.phase = "done"
    with pytest.raises(ProtocolError):
        oracle_action(st, cfg)


def test_static_approach_distance_nonincreasing():
    cfg = EnvConfig(tier="static")
    rng = make_rng(11)
    st = env_reset(cfg, rng)
    prev = np.linalg.norm(st.target_pos - st.ee_pos)
    while st.phase == "approach":
        st = env_step(st, oracle_action(st, cfg), cfg, rng)
        d = np.linalg.norm(st.target_pos - st.ee_pos)
        assert d <= prev + 1e-12
        prev = d
    assert st.phase == "carry"


@pytest.mark.parametrize("tier", ["easy", "hard", "static"])
def test_oracle_success_rate_gate(tier):
    """Expert quality gate: >= 0.95 success over 500 seeds on every tier."""
    cfg = EnvConfig(tier=tier)
    wins = 0
    lengths = []
    for seed in range(500):
        records, success = run_oracle_episode(cfg, spawn_rng(1234, seed))
        wins += int(success)
        if success:
            lengths.append(len(records))
    rate = wins / 500
    assert rate >= 0.95, f"{tier}: oracle success {rate:.3f}"
    assert min(lengths) >= 28


def test_success_trace_phase_ordering():
    cfg = EnvConfig()
    rng = spawn_rng(7, 0)
    st = env_reset(cfg, rng)
    phases = [st.phase]
    while not st.is_terminal():
        st = env_step(st, oracle_action(st, cfg), cfg, rng)
        phases.append(st.phase)
    assert st.phase == "done"
    # approach happens before carry, carry before done, no interleaving back
    first_carry = phases.index("carry")
    assert all(p == "approach" for p in phases[:first_carry])
    assert all(p == "carry" for p in phases[first_carry:-1])


def test_generate_dataset_roundtrip(tmp_path):
    cfg = EnvConfig()
    out = tmp_path / "ds"
    eps, manifest = generate_dataset(cfg, 3, seed=5, out_dir=str(out))
    assert len(eps) == 3
    assert all(len(e) >= 28 for e in eps)
    assert manifest["tier"] == "easy"
    assert len(manifest["config_hash"]) == 12
    back_eps, back_manifest = load_dataset(str(out))
    assert back_manifest["config_hash"] == manifest["config_hash"]
    for a, b in zip(eps, back_eps):
        assert np.array_equal(a.ee, b.ee)
        assert np.array_equal(a.actions, b.actions)
        assert np.array_equal(a.tvel, b.tvel)
        assert np.array_equal(a.frame(10), b.frame(10))


def test_generate_dataset_deterministic():
    cfg = EnvConfig()
    a, _ = generate_dataset(cfg, 2, seed=9)
    b, _ = generate_dataset(cfg, 2, seed=9)
    for ea, eb in zip(a, b):
        assert np.array_equal(ea.actions, eb.actions)
        assert np.array_equal(ea.target, eb.target)
    c, _ = generate_dataset(cfg, 2, seed=10)
    assert not np.array_equal(a[0].target, c[0].target)


def test_generate_dataset_budget_error():
    # an impossible time budget forces every attempt to fail
    cfg = EnvConfig(max_steps=5)
    with pytest.raises(GenerationError):
        generate_dataset(cfg, 2, seed=0)


def test_episode_frames_and_contact():
    cfg = EnvConfig()
    eps, _ = generate_dataset(cfg, 1, seed=3)
    ep = eps[0]
    assert np.array_equal(ep.frame(-1), np.zeros((16, 16)))
    grid = ep.frame(0)
    assert grid.sum() == pytest.approx(1.9)
    # contact turns on exactly when held does
    assert np.array_equal(ep.contact, ep.held)
    assert ep.contact[0] == 0 and ep.contact[-1] == 1


def test_noisy_execution_keeps_clean_labels():
    cfg = EnvConfig(tier="easy")
    shell_pos = shell_neg = rel_pos = rel_neg = 0
    for ep_seed in range(6):
        records, success = run_oracle_episode(cfg, spawn_rng(3, ep_seed),
                                              action_noise=0.5)
        assert success
        for rec in records:
            st = WorldState(time_step=rec["t"], ee_pos=np.asarray(rec["ee"]),
                            gripper_closed=bool(rec["grip"]), held=bool(rec["held"]),
                            target_pos=np.asarray(rec["target"]),
                            target_vel=np.asarray(rec["tvel"]), phase=rec["phase"])
            clean = oracle_action(st, cfg)
            # translation labels are always the expert's clean answer
            assert np.allclose(clean[:2], rec["action"][:2], atol=1e-12)
            dist = float(np.linalg.norm(st.target_pos - st.ee_pos))
            d_goal = float(np.linalg.norm(st.ee_pos - np.asarray(cfg.goal_center)))
            if st.held:
                if d_goal > cfg.goal_radius:
                    assert rec["action"][2] == 1.0
                elif rec["action"][2] > 0:
                    rel_pos += 1
                else:
                    rel_neg += 1
            elif dist <= cfg.grasp_radius:
                assert rec["action"][2] == clean[2]
            elif dist > 5.0 * cfg.grasp_radius:
                assert rec["action"][2] == -1.0
            elif rec["action"][2] > 0:
                shell_pos += 1
            else:
                shell_neg += 1
        moved = [np.asarray(records[i + 1]["ee"]) - np.asarray(records[i]["ee"])
                 for i in range(len(records) - 1)]
        labeled = [np.asarray(rec["action"][:2]) for rec in records[:-1]]
        gaps = [float(np.linalg.norm(m - l)) for m, l in zip(moved, labeled)]
        # the executed transitions visibly diverge from the recorded labels
        assert np.mean(gaps) > 1e-4
    # the jittered close band emits both signs between the latch radius and
    # its outer edge, so the gripper flag cannot predict the close label
    assert shell_pos > 0 and shell_neg > 0
    # same for the open band inside the goal region while carrying
    assert rel_pos > 0 and rel_neg > 0


def test_noisy_dataset_success_rate_holds():
    wins = 0
    for seed in range(60):
        _, success = run_oracle_episode(EnvConfig(tier="easy"),
                                        spawn_rng(99, seed), action_noise=0.5)
        wins += int(success)
    assert wins / 60 >= 0.95


def test_random_start_diversifies_initial_poses():
    cfg = EnvConfig(tier="static")
    eps, manifest = generate_dataset(cfg, 30, seed=7, random_start=1.0)
    starts = np.array([ep.ee[0] for ep in eps])
    assert len(np.unique(starts, axis=0)) == 30
    assert starts.min() >= 0.05 and starts.max() <= 0.95
    # coverage reaches geometries the canonical reset never produces
    assert any(ep.ee[0, 1] > ep.target[0, 1] for ep in eps)
    assert manifest["random_start"] == 1.0


def test_terminal_padding_repeats_final_record():
    cfg = EnvConfig(tier="static")
    plain, _ = generate_dataset(cfg, 4, seed=11)
    padded, manifest = generate_dataset(cfg, 4, seed=11, pad_terminal=6)
    assert manifest["pad_terminal"] == 6
    for a, b in zip(plain, padded):
        assert len(b) == len(a) + 6
        # prefix is the unpadded episode, suffix repeats its closing step
        assert np.array_equal(b.ee[:len(a)], a.ee)
        assert np.array_equal(b.actions[:len(a)], a.actions)
        for t in range(len(a), len(b)):
            assert np.array_equal(b.ee[t], a.ee[-1])
            assert np.array_equal(b.actions[t], a.actions[-1])
            assert b.held[t] == a.held[-1]
    with pytest.raises(Exception):
        generate_dataset(cfg, 1, seed=11, pad_terminal=-1)


def test_random_start_zero_matches_canonical_reset():
    cfg = EnvConfig(tier="static")
    a, _ = generate_dataset(cfg, 5, seed=3)
    b, _ = generate_dataset(cfg, 5, seed=3, random_start=0.0)
    for ea, eb in zip(a, b):
        assert np.array_equal(ea.ee, eb.ee)
        assert np.array_equal(ea.actions, eb.actions)
        assert np.allclose(ea.ee[0], cfg.ee_start)


def test_random_start_validated():
    cfg = EnvConfig(tier="static")
    with pytest.raises(Exception, match="random_start"):
        generate_dataset(cfg, 2, seed=0, random_start=1.5)
    with pytest.raises(Exception, match="random_start"):
        generate_dataset(cfg, 2, seed=0, random_start=-0.1)


def test_near_start_opens_inside_grasp_band():
    cfg = EnvConfig(tier="static")
    eps, manifest = generate_dataset(cfg, 30, seed=11, near_start=1.0)
    d0 = np.array([np.linalg.norm(ep.ee[0] - ep.target[0]) for ep in eps])
    assert (d0 <= 0.16).all()
    # open-gripper states carrying a close label exist right at the start
    assert any(ep.grip[0] == 0 and ep.actions[0, 2] > 0 for ep in eps)
    assert manifest["near_start"] == 1.0


def test_start_mode_probabilities_validated():
    cfg = EnvConfig(tier="static")
    with pytest.raises(Exception, match="near_start"):
        generate_dataset(cfg, 2, seed=0, near_start=-0.5)
    with pytest.raises(Exception, match="exceed"):
        generate_dataset(cfg, 2, seed=0, random_start=0.7, near_start=0.7)
    with pytest.raises(Exception, match="start"):
        run_oracle_episode(cfg, make_rng(0), start="sideways")
