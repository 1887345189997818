"""Experiment harness: controller presets, paired evaluation, report tables.

Controller modes bundle the training recipe knobs (flow-time bias, stage
sampling, horizon weighting, motion usage) with the matching inference
protocol, so a mode name is enough to train and evaluate a policy end to end.

All comparative evaluations are paired: episode i of every cell draws its
world stream from (seed, env key, i) and its generation noise from
(seed, noise key, i), so rows differ only in the controller.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats as _sstats

from .dataset import ChunkingConfig
from .env import EnvConfig
from .errors import AnalysisError, ConfigurationError
from .flow import PolicyBundle, PolicyTrainConfig, train_policy
from .motion import MotionConfig, MotionPredictor
from .oracle import run_oracle_episode
from .sampling import spawn_rng
from .scheduler import (LatencyModel, RolloutTrace, effective_hz_from_trace,
                        lifespan_micro_per_macro, run_baseline_rollout,
                        run_tidal_rollout, write_trace)
from .util import config_hash, ensure_dir

_KEY_ENV = 901      # per-episode world stream (reset + dynamics)
_KEY_NOISE = 902    # per-episode generation noise stream


# --- controller modes --------------------------------------------------------

@dataclass(frozen=True)
class ControllerMode:
    name: str
    alpha: float
    stage_sampling: str
    weight_near: float
    motion_on: bool
    protocol: str          # "interleaved" | "batch"
    solve_steps: int


MODES: dict[str, ControllerMode] = {
    "tidal": ControllerMode(
        "tidal", alpha=5.0, stage_sampling="uniform", weight_near=2.0,
        motion_on=True, protocol="interleaved", solve_steps=1),
    "tidal_no_motion": ControllerMode(
        "tidal_no_motion", alpha=5.0, stage_sampling="uniform", weight_near=2.0,
        motion_on=False, protocol="interleaved", solve_steps=1),
    "baseline": ControllerMode(
        "baseline", alpha=1.0, stage_sampling="zero", weight_near=1.0,
        motion_on=False, protocol="batch", solve_steps=4),
    "baseline_plus_motion": ControllerMode(
        "baseline_plus_motion", alpha=1.0, stage_sampling="zero", weight_near=1.0,
        motion_on=True, protocol="batch", solve_steps=4),
}


def get_mode(name: str) -> ControllerMode:
    if name not in MODES:
        raise ConfigurationError(
            f"unknown controller mode {name!r}; choose from {sorted(MODES)}")
    return MODES[name]


def mode_chunking(mode: ControllerMode, base: ChunkingConfig) -> ChunkingConfig:
    return replace(base, weight_near=mode.weight_near)


def mode_train_config(mode: ControllerMode, base: PolicyTrainConfig) -> PolicyTrainConfig:
    return replace(base, alpha=mode.alpha, stage_sampling=mode.stage_sampling,
                   motion_on=mode.motion_on)


def train_controller(mode_name: str, episodes, motion: MotionPredictor | None,
                     chunking: ChunkingConfig, train: PolicyTrainConfig):
    """Train one controller's policy bundle with the mode's preset knobs.

    All modes share the base seed, so same-seed pairs (tidal vs
    tidal_no_motion) differ only in the ablated ingredient.
    """
    mode = get_mode(mode_name)
    bundle, telem = train_policy(
        episodes, motion if mode.motion_on else None,
        mode_chunking(mode, chunking), mode_train_config(mode, train))
    return bundle, telem


# --- success statistics ------------------------------------------------------

def wilson_interval(successes: int, n: int, z: float = 1.96) -> tuple[float, float]:
    if n <= 0:
        raise AnalysisError(f"need at least one trial, got n={n}")
    if not 0 <= successes <= n:
        raise AnalysisError(f"successes {successes} outside 0..{n}")
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass
class EvalCell:
    mode: str
    tier: str
    paused: bool
    n: int
    successes: int
    mean_exec_steps: float
    mean_hz: float
    checkpoint: str        # config hash of the evaluated bundle

    @property
    def rate(self) -> float:
        return self.successes / self.n

    @property
    def wilson(self) -> tuple[float, float]:
        return wilson_interval(self.successes, self.n)

    @property
    def halfwidth(self) -> float:
        lo, hi = self.wilson
        return (hi - lo) / 2.0


def run_controller_episode(mode: ControllerMode, bundle: PolicyBundle,
                           motion: MotionPredictor | None, env_cfg: EnvConfig,
                           lat: LatencyModel, seed: int, episode_idx: int,
                           *, paused: bool = True,
                           micro_per_macro: int | None = None) -> RolloutTrace:
    env_rng = spawn_rng(seed, _KEY_ENV, episode_idx)
    noise_rng = spawn_rng(seed, _KEY_NOISE, episode_idx)
    if mode.protocol == "interleaved":
        return run_tidal_rollout(bundle, motion, env_cfg, lat, env_rng, noise_rng,
                                 paused=paused, micro_per_macro=micro_per_macro,
                                 motion_on=mode.motion_on)
    return run_baseline_rollout(bundle, motion, env_cfg, lat, env_rng, noise_rng,
                                paused=paused, solve_steps=mode.solve_steps,
                                motion_on=mode.motion_on)


def eval_success_rate(mode_name: str, bundle: PolicyBundle,
                      motion: MotionPredictor | None, env_cfg: EnvConfig,
                      lat: LatencyModel, n_episodes: int, seed: int,
                      *, paused: bool = True, micro_per_macro: int | None = None,
                      trace_dir: str | None = None) -> EvalCell:
    """Success fraction over n paired episodes for one controller cell."""
    if n_episodes < 1:
        raise ConfigurationError(f"n_episodes must be >= 1, got {n_episodes}")
    mode = get_mode(mode_name)
    successes = 0
    exec_steps = []
    hzs = []
    for i in range(n_episodes):
        trace = run_controller_episode(mode, bundle, motion, env_cfg, lat,
                                       seed, i, paused=paused,
                                       micro_per_macro=micro_per_macro)
        successes += int(trace.success)
        exec_steps.append(trace.meta["executed_steps"])
        if trace.meta["n_chunks"] >= 2:
            hzs.append(effective_hz_from_trace(trace))
        if trace_dir is not None:
            write_trace(trace, os.path.join(trace_dir, f"ep{i:05d}.jsonl"))
    return EvalCell(mode=mode_name, tier=env_cfg.tier, paused=paused,
                    n=n_episodes, successes=successes,
                    mean_exec_steps=float(np.mean(exec_steps)),
                    mean_hz=float(np.mean(hzs)) if hzs else float("nan"),
                    checkpoint=config_hash({"train": bundle.train_hash,
                                            "fingerprint": bundle.fingerprint()}))


def eval_oracle_rate(env_cfg: EnvConfig, n_episodes: int, seed: int) -> EvalCell:
    """Latency-free expert as controller; the data-quality calibration row."""
    successes = 0
    lengths = []
    for i in range(n_episodes):
        records, ok = run_oracle_episode(env_cfg, spawn_rng(seed, _KEY_ENV, i))
        successes += int(ok)
        lengths.append(len(records))
    return EvalCell(mode="oracle", tier=env_cfg.tier, paused=True,
                    n=n_episodes, successes=successes,
                    mean_exec_steps=float(np.mean(lengths)),
                    mean_hz=float("nan"), checkpoint="oracle")


# --- results tables ----------------------------------------------------------

class ResultsTable:
    """Uniquely keyed result rows with text and delimited renderings."""

    def __init__(self, columns: list[str]):
        if not columns:
            raise ConfigurationError("a results table needs at least one column")
        self.columns = list(columns)
        self.rows: list[dict] = []

    def add_row(self, **values):
        unknown = set(values) - set(self.columns)
        if unknown:
            raise ConfigurationError(f"unknown columns {sorted(unknown)}")
        key = values.get(self.columns[0])
        if any(r.get(self.columns[0]) == key for r in self.rows):
            raise AnalysisError(f"duplicate row key {key!r}")
        self.rows.append({c: values.get(c, "") for c in self.columns})

    @staticmethod
    def _fmt(v) -> str:
        if isinstance(v, bool):
            return str(v)
        if isinstance(v, float):
            return "nan" if np.isnan(v) else f"{v:.4f}"
        return str(v)

    def to_text(self) -> str:
        cells = [[self._fmt(r[c]) for c in self.columns] for r in self.rows]
        widths = [max(len(c), *(len(row[i]) for row in cells)) if cells else len(c)
                  for i, c in enumerate(self.columns)]
        lines = ["  ".join(c.ljust(w) for c, w in zip(self.columns, widths)),
                 "  ".join("-" * w for w in widths)]
        lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
        return "\n".join(lines) + "\n"

    def write(self, path_prefix: str) -> tuple[str, str]:
        """Write <prefix>.txt and <prefix>.csv; returns both paths."""
        ensure_dir(os.path.dirname(path_prefix) or ".")
        txt = path_prefix + ".txt"
        csvp = path_prefix + ".csv"
        with open(txt, "w") as fh:
            fh.write(self.to_text())
        import csv
        with open(csvp, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=self.columns)
            w.writeheader()
            for r in self.rows:
                w.writerow({c: self._fmt(r[c]) for c in self.columns})
        return txt, csvp


def cells_to_table(cells: list[EvalCell]) -> ResultsTable:
    t = ResultsTable(["cell", "mode", "tier", "protocol", "n", "successes",
                      "success_rate", "wilson_lo", "wilson_hi",
                      "mean_exec_steps", "mean_hz", "checkpoint"])
    for c in cells:
        proto = "paused" if c.paused else "nonpaused"
        lo, hi = c.wilson
        t.add_row(cell=f"{c.mode}/{c.tier}/{proto}", mode=c.mode, tier=c.tier,
                  protocol=proto, n=c.n, successes=c.successes,
                  success_rate=c.rate, wilson_lo=lo, wilson_hi=hi,
                  mean_exec_steps=c.mean_exec_steps, mean_hz=c.mean_hz,
                  checkpoint=c.checkpoint)
    return t


# --- experiment suites -------------------------------------------------------

ABLATION_ORDER = ("baseline", "tidal_no_motion", "baseline_plus_motion", "tidal")


def ablation_suite(bundles: dict[str, PolicyBundle],
                   motion: MotionPredictor | None, env_cfg: EnvConfig,
                   lat: LatencyModel, n_episodes: int, seed: int,
                   *, paused: bool = True) -> tuple[dict[str, EvalCell], dict]:
    """All four controllers on identical episode seeds, plus ordering checks."""
    missing = [m for m in ABLATION_ORDER if m not in bundles]
    if missing:
        raise ConfigurationError(f"missing checkpoints for modes {missing}")
    cells = {}
    for name in ABLATION_ORDER:
        mode = get_mode(name)
        cells[name] = eval_success_rate(
            name, bundles[name], motion if mode.motion_on else None,
            env_cfg, lat, n_episodes, seed, paused=paused)
    checks = ablation_ordering(cells)
    return cells, checks


def ablation_ordering(cells: dict[str, EvalCell]) -> dict:
    """Directional ordering of the ablation grid.

    The middle inequality tolerates ties within the Wilson intervals; the
    outer two compare point estimates.
    """
    tidal = cells["tidal"]
    bpm = cells["baseline_plus_motion"]
    base = cells["baseline"]
    tnm = cells["tidal_no_motion"]
    middle = bpm.rate >= base.rate or bpm.wilson[1] >= base.wilson[0]
    out = {
        "tidal_ge_baseline_plus_motion": tidal.rate >= bpm.rate,
        "baseline_plus_motion_ge_baseline": middle,
        "tidal_ge_tidal_no_motion": tidal.rate >= tnm.rate,
    }
    out["ok"] = all(out.values())
    return out


def protocol_compare(bundles: dict[str, PolicyBundle],
                     motion: MotionPredictor | None, env_cfg: EnvConfig,
                     lat: LatencyModel, n_episodes: int, seed: int,
                     modes: tuple[str, ...] = ("tidal", "baseline")) -> tuple[dict, dict]:
    """Same seeds under frozen and advancing worlds; retention per mode."""
    cells: dict[tuple[str, bool], EvalCell] = {}
    for name in modes:
        mode = get_mode(name)
        m = motion if mode.motion_on else None
        for paused in (True, False):
            cells[(name, paused)] = eval_success_rate(
                name, bundles[name], m, env_cfg, lat, n_episodes, seed,
                paused=paused)
    retention = {}
    for name in modes:
        p = cells[(name, True)].rate
        np_ = cells[(name, False)].rate
        retention[name] = float("nan") if p == 0 else np_ / p
    checks = {}
    if {"tidal", "baseline"} <= set(modes):
        checks["tidal_retention_exceeds_baseline"] = (
            retention["tidal"] > retention["baseline"])
        checks["baseline_nonpaused_strictly_below_paused"] = (
            cells[("baseline", False)].rate < cells[("baseline", True)].rate)
        checks["ok"] = all(checks.values())
    return cells, {"retention": retention, "checks": checks}


LIFESPAN_GRID = (28, 36, 44, 56, 64, 80, 100)


def lifespan_sweep(bundle: PolicyBundle, motion: MotionPredictor | None,
                   env_cfg: EnvConfig, lat: LatencyModel, n_episodes: int,
                   seed: int, lifespans: tuple[int, ...] = LIFESPAN_GRID) -> dict:
    """Success vs intent lifespan, retention relative to the shortest."""
    if not lifespans:
        raise ConfigurationError("empty lifespan grid")
    rows = []
    for lifespan in lifespans:
        micro = lifespan_micro_per_macro(lifespan, bundle.chunking)
        cell = eval_success_rate("tidal", bundle, motion, env_cfg, lat,
                                 n_episodes, seed, micro_per_macro=micro)
        rows.append({"lifespan": lifespan, "micro_per_macro": micro,
                     "rate": cell.rate, "successes": cell.successes,
                     "n": cell.n})
    ref = rows[0]["rate"]
    if ref == 0:
        raise AnalysisError(
            f"reference lifespan {lifespans[0]} has zero success; retention undefined")
    for r in rows:
        r["retention"] = r["rate"] / ref
    rho = float(_sstats.spearmanr([r["lifespan"] for r in rows],
                                  [r["rate"] for r in rows])[0])
    return {"rows": rows, "spearman_rho": rho, "reference_lifespan": lifespans[0]}


def lifespan_table(sweep: dict) -> ResultsTable:
    t = ResultsTable(["lifespan", "micro_per_macro", "n", "successes",
                      "success_rate", "retention"])
    for r in sweep["rows"]:
        t.add_row(lifespan=r["lifespan"], micro_per_macro=r["micro_per_macro"],
                  n=r["n"], successes=r["successes"], success_rate=r["rate"],
                  retention=r["retention"])
    return t


def hyperparam_sweep(episodes, motion: MotionPredictor | None,
                     chunking: ChunkingConfig, base_train: PolicyTrainConfig,
                     env_cfg: EnvConfig, lat: LatencyModel, *,
                     weight_grid: tuple[float, ...] = (1.0, 1.5, 2.0, 2.5, 3.0),
                     weight_sweep_alpha: float = 1.5,
                     alpha_grid: tuple[float, ...] = (3.0, 5.0, 7.0),
                     alpha_sweep_weight: float = 2.0,
                     budget_frac: float = 0.2, n_eval: int = 50,
                     seed: int = 0) -> ResultsTable:
    """Horizon-weight and time-bias grids on a reduced training budget.

    The weight grid trains at a midway time bias; the bias grid trains at the
    default weight. Every cell shares episode seeds. The best row per sweep is
    marked; at this scale the argmax is reported, not asserted.
    """
    if not 0 < budget_frac <= 1:
        raise ConfigurationError(f"budget_frac must be in (0, 1], got {budget_frac}")
    steps = max(1, int(round(base_train.steps * budget_frac)))
    t = ResultsTable(["cell", "sweep", "value", "n", "successes",
                      "success_rate", "wilson_lo", "wilson_hi", "best"])
    results = []
    for w in weight_grid:
        ck = replace(chunking, weight_near=float(w))
        tc = replace(base_train, alpha=weight_sweep_alpha, steps=steps,
                     stage_sampling="uniform", motion_on=motion is not None)
        bundle, _ = train_policy(episodes, motion, ck, tc)
        cell = eval_success_rate("tidal", bundle, motion, env_cfg, lat,
                                 n_eval, seed)
        results.append(("weight", float(w), cell))
    for a in alpha_grid:
        ck = replace(chunking, weight_near=alpha_sweep_weight)
        tc = replace(base_train, alpha=float(a), steps=steps,
                     stage_sampling="uniform", motion_on=motion is not None)
        bundle, _ = train_policy(episodes, motion, ck, tc)
        cell = eval_success_rate("tidal", bundle, motion, env_cfg, lat,
                                 n_eval, seed)
        results.append(("alpha", float(a), cell))
    for sweep_name in ("weight", "alpha"):
        group = [r for r in results if r[0] == sweep_name]
        best = max(g[2].rate for g in group)
        for name, val, cell in group:
            lo, hi = cell.wilson
            t.add_row(cell=f"{name}={val}", sweep=name, value=val, n=cell.n,
                      successes=cell.successes, success_rate=cell.rate,
                      wilson_lo=lo, wilson_hi=hi, best=cell.rate == best)
    return t


# --- config files ------------------------------------------------------------

@dataclass(frozen=True)
class EvalConfig:
    n_episodes: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.n_episodes < 1:
            raise ConfigurationError("n_episodes must be >= 1")


CONFIG_SECTIONS = {
    "env": EnvConfig,
    "chunking": ChunkingConfig,
    "latency": LatencyModel,
    "motion": MotionConfig,
    "train": PolicyTrainConfig,
    "eval": EvalConfig,
}


def build_section(cls, data: dict, section: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigurationError(
            f"unknown key(s) {unknown} in config section {section!r}; "
            f"valid keys: {sorted(names)}")
    coerced = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
    return cls(**coerced)


def experiment_from_dict(raw: dict) -> dict:
    unknown = sorted(set(raw) - set(CONFIG_SECTIONS))
    if unknown:
        raise ConfigurationError(
            f"unknown config section(s) {unknown}; valid: {sorted(CONFIG_SECTIONS)}")
    out = {}
    for section, cls in CONFIG_SECTIONS.items():
        data = raw.get(section, {})
        if not isinstance(data, dict):
            raise ConfigurationError(f"config section {section!r} must be a mapping")
        out[section] = build_section(cls, data, section)
    return out


def load_experiment_config(path: str) -> dict:
    from .util import read_json
    return experiment_from_dict(read_json(path))
