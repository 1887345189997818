"""Mode presets, paired evaluation, tables, config loading."""

import csv

import numpy as np
import pytest

from dualfreq.dataset import ChunkingConfig
from dualfreq.env import EnvConfig
from dualfreq.errors import AnalysisError, ConfigurationError
from dualfreq.flow import PolicyBundle, PolicyTrainConfig, vf_input_dim
from dualfreq.harness import (MODES, EvalCell, ResultsTable, ablation_ordering,
                              ablation_suite, build_section, cells_to_table,
                              eval_oracle_rate, eval_success_rate,
                              experiment_from_dict, get_mode, hyperparam_sweep,
                              lifespan_sweep, mode_chunking, mode_train_config,
                              protocol_compare, wilson_interval)
from dualfreq.motion import MotionConfig, MotionPredictor
from dualfreq.nets import mlp_init
from dualfreq.oracle import generate_dataset
from dualfreq.sampling import make_rng
from dualfreq.scheduler import LatencyModel, tidal_effective_hz

CK = ChunkingConfig()
LAT = LatencyModel()


def _rand_bundle(seed=0, motion_on=True):
    rng = make_rng(seed)
    return PolicyBundle(policy=mlp_init([vf_input_dim(CK, 12, 32), 32, 48], rng),
                        intent=mlp_init([258, 16, 32], rng), chunking=CK,
                        action_scale=0.003, alpha=5.0, motion_on=motion_on,
                        motion_dim=8, grid_resolution=16, train_hash="t")


@pytest.fixture(scope="module")
def rand_motion():
    cfg = MotionConfig()
    rng = make_rng(99)
    return MotionPredictor(trunk=mlp_init(cfg.trunk_dims(), rng),
                           head=mlp_init(cfg.head_dims(), rng), cfg=cfg)


def _fake_cell(mode, successes, n=200):
    return EvalCell(mode=mode, tier="easy", paused=True, n=n,
                    successes=successes, mean_exec_steps=0.0,
                    mean_hz=float("nan"), checkpoint="x")


# --- statistics --------------------------------------------------------------

def test_wilson_interval_reference_values():
    # independent reference computation of the score interval
    def ref(k, n, z=1.96):
        p = k / n
        d = 1 + z * z / n
        c = (p + z * z / (2 * n)) / d
        h = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / d
        return c - h, c + h

    for k, n in ((0, 10), (5, 10), (10, 10), (31, 200), (122, 200)):
        assert np.allclose(wilson_interval(k, n), ref(k, n), rtol=0, atol=1e-12)
    lo, hi = wilson_interval(5, 10)
    assert abs((lo + hi) / 2 - 0.5) < 1e-12
    assert wilson_interval(0, 10)[0] >= 0.0
    assert wilson_interval(10, 10)[1] <= 1.0 + 1e-12


def test_wilson_interval_validation():
    with pytest.raises(AnalysisError):
        wilson_interval(1, 0)
    with pytest.raises(AnalysisError):
        wilson_interval(5, 4)


# --- mode presets -------------------------------------------------------------

def test_mode_presets_match_training_recipes():
    t = get_mode("tidal")
    assert (t.alpha, t.stage_sampling, t.weight_near, t.motion_on) == \
        (5.0, "uniform", 2.0, True)
    assert (t.protocol, t.solve_steps) == ("interleaved", 1)
    b = get_mode("baseline")
    assert (b.alpha, b.stage_sampling, b.weight_near, b.motion_on) == \
        (1.0, "zero", 1.0, False)
    assert (b.protocol, b.solve_steps) == ("batch", 4)
    assert get_mode("tidal_no_motion").motion_on is False
    assert get_mode("baseline_plus_motion").motion_on is True
    assert set(MODES) == {"tidal", "tidal_no_motion", "baseline",
                          "baseline_plus_motion"}
    with pytest.raises(ConfigurationError):
        get_mode("nope")


def test_mode_overrides_apply():
    ck = mode_chunking(get_mode("baseline"), CK)
    assert ck.weight_near == 1.0 and ck.weight_far == 1.0
    assert np.array_equal(ck.weights(), np.ones(16))
    tc = mode_train_config(get_mode("baseline"), PolicyTrainConfig())
    assert tc.alpha == 1.0 and tc.stage_sampling == "zero" and not tc.motion_on
    tc2 = mode_train_config(get_mode("tidal"), PolicyTrainConfig(seed=9))
    assert tc2.seed == 9 and tc2.alpha == 5.0


# --- evaluation ---------------------------------------------------------------

def test_eval_oracle_rate_calibration():
    cell = eval_oracle_rate(EnvConfig(tier="easy"), 40, seed=0)
    assert cell.rate >= 0.95
    assert cell.mode == "oracle" and cell.checkpoint == "oracle"


def test_eval_success_rate_deterministic_and_measured_hz(rand_motion):
    bundle = _rand_bundle()
    c1 = eval_success_rate("tidal", bundle, rand_motion, EnvConfig(tier="easy"),
                           LAT, 3, seed=11)
    c2 = eval_success_rate("tidal", bundle, rand_motion, EnvConfig(tier="easy"),
                           LAT, 3, seed=11)
    assert (c1.successes, c1.mean_exec_steps, c1.mean_hz) == \
        (c2.successes, c2.mean_exec_steps, c2.mean_hz)
    want = tidal_effective_hz(LAT, CK)
    assert abs(c1.mean_hz - want) <= 0.02 * want
    with pytest.raises(ConfigurationError):
        eval_success_rate("tidal", bundle, rand_motion, EnvConfig(), LAT, 0, 0)


def test_ablation_suite_runs_all_modes(rand_motion):
    bundles = {m: _rand_bundle(i, motion_on=MODES[m].motion_on)
               for i, m in enumerate(MODES)}
    cells, checks = ablation_suite(bundles, rand_motion, EnvConfig(tier="easy"),
                                   LAT, 2, seed=3)
    assert set(cells) == set(MODES)
    assert set(checks) == {"tidal_ge_baseline_plus_motion",
                           "baseline_plus_motion_ge_baseline",
                           "tidal_ge_tidal_no_motion", "ok"}
    with pytest.raises(ConfigurationError):
        ablation_suite({"tidal": bundles["tidal"]}, rand_motion,
                       EnvConfig(), LAT, 2, 3)


def test_ablation_ordering_logic():
    good = {"tidal": _fake_cell("tidal", 122),
            "baseline_plus_motion": _fake_cell("baseline_plus_motion", 100),
            "baseline": _fake_cell("baseline", 62),
            "tidal_no_motion": _fake_cell("tidal_no_motion", 66)}
    assert ablation_ordering(good)["ok"]

    # middle inequality may dip inside the Wilson interval
    tie = dict(good)
    tie["baseline_plus_motion"] = _fake_cell("baseline_plus_motion", 60)
    r = ablation_ordering(tie)
    assert r["baseline_plus_motion_ge_baseline"] and r["ok"]

    bad = dict(good)
    bad["tidal"] = _fake_cell("tidal", 50)
    r = ablation_ordering(bad)
    assert not r["tidal_ge_baseline_plus_motion"] and not r["ok"]


def test_protocol_compare_machinery(rand_motion):
    bundles = {"tidal": _rand_bundle(0),
               "baseline": _rand_bundle(1, motion_on=False)}
    cells, report = protocol_compare(bundles, rand_motion,
                                     EnvConfig(tier="easy"), LAT, 2, seed=5)
    assert set(cells) == {("tidal", True), ("tidal", False),
                          ("baseline", True), ("baseline", False)}
    assert set(report["retention"]) == {"tidal", "baseline"}
    assert "ok" in report["checks"]


def test_lifespan_sweep_needs_reference_successes(rand_motion):
    with pytest.raises(AnalysisError):
        lifespan_sweep(_rand_bundle(), rand_motion, EnvConfig(tier="easy"),
                       LAT, 2, seed=0, lifespans=(28, 36))
    with pytest.raises(ConfigurationError):
        lifespan_sweep(_rand_bundle(), rand_motion, EnvConfig(), LAT, 2, 0,
                       lifespans=())


def test_hyperparam_sweep_smoke(rand_motion):
    eps, _ = generate_dataset(EnvConfig(tier="easy"), 3, seed=3)
    base = PolicyTrainConfig(hidden=(16,), intent_hidden=(8,), embed_dim=4,
                             steps=20, batch_size=8, log_every=10)
    table = hyperparam_sweep(eps, rand_motion, CK, base, EnvConfig(tier="easy"),
                             LAT, weight_grid=(1.0, 2.0), alpha_grid=(5.0,),
                             budget_frac=0.5, n_eval=2, seed=0)
    assert len(table.rows) == 3
    sweeps = {r["sweep"] for r in table.rows}
    assert sweeps == {"weight", "alpha"}
    assert any(r["best"] for r in table.rows if r["sweep"] == "weight")
    with pytest.raises(ConfigurationError):
        hyperparam_sweep(eps, rand_motion, CK, base, EnvConfig(), LAT,
                         budget_frac=0.0)


# --- tables -------------------------------------------------------------------

def test_results_table_contract(tmp_path):
    t = ResultsTable(["cell", "rate"])
    t.add_row(cell="a", rate=0.5)
    t.add_row(cell="b", rate=1 / 3)
    with pytest.raises(AnalysisError):
        t.add_row(cell="a", rate=0.1)
    with pytest.raises(ConfigurationError):
        t.add_row(cell="c", wrong=1)
    text = t.to_text()
    assert text.splitlines()[0].startswith("cell")
    assert "0.3333" in text
    txt, csvp = t.write(str(tmp_path / "res"))
    with open(csvp) as fh:
        rows = list(csv.DictReader(fh))
    assert rows[0]["cell"] == "a" and rows[1]["rate"] == "0.3333"
    with pytest.raises(ConfigurationError):
        ResultsTable([])


def test_cells_to_table_round_trip():
    cells = [_fake_cell("tidal", 122), _fake_cell("baseline", 62)]
    t = cells_to_table(cells)
    assert len(t.rows) == 2
    assert t.rows[0]["success_rate"] == 0.61
    assert t.rows[0]["cell"] == "tidal/easy/paused"


# --- config files ---------------------------------------------------------------

def test_experiment_config_defaults_and_overrides():
    out = experiment_from_dict({})
    assert out["env"] == EnvConfig()
    assert out["chunking"] == ChunkingConfig()
    out = experiment_from_dict({"env": {"tier": "hard"},
                                "train": {"hidden": [64, 64], "steps": 5},
                                "eval": {"n_episodes": 10}})
    assert out["env"].tier == "hard"
    assert out["train"].hidden == (64, 64)
    assert out["eval"].n_episodes == 10


def test_experiment_config_strictness():
    with pytest.raises(ConfigurationError):
        experiment_from_dict({"envv": {}})
    with pytest.raises(ConfigurationError):
        experiment_from_dict({"env": {"tierr": "easy"}})
    with pytest.raises(ConfigurationError):
        experiment_from_dict({"env": []})
    with pytest.raises(ConfigurationError):
        experiment_from_dict({"eval": {"n_episodes": 0}})
    with pytest.raises(ConfigurationError):
        build_section(EnvConfig, {"dt": 0.02, "speed": 1}, "env")
