"""Command-line front end over the library pipeline.

Subcommands cover the full experiment path: expert data generation, motion
pretraining, policy training per controller mode, single-cell evaluation, the
ablation grid, hyperparameter and lifespan sweeps, and the paused-vs-nonpaused
comparison. A JSON config file supplies section defaults; flags override it.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

from .env import TIERS, EnvConfig
from .errors import (AnalysisError, ConfigurationError, GenerationError,
                     ProtocolError, TrainingError)
from .flow import load_policy_bundle, save_policy_bundle
from .harness import (ABLATION_ORDER, LIFESPAN_GRID, MODES, ablation_suite,
                      cells_to_table, eval_oracle_rate, eval_success_rate,
                      experiment_from_dict, get_mode, hyperparam_sweep,
                      lifespan_sweep, lifespan_table, load_experiment_config,
                      protocol_compare, train_controller)
from .motion import load_motion, save_motion, train_motion
from .oracle import generate_dataset, load_dataset
from .util import ensure_dir, write_json

_ERRORS = (ConfigurationError, ProtocolError, GenerationError, TrainingError,
           AnalysisError, FileNotFoundError, NotADirectoryError,
           json.JSONDecodeError)


def _load_sections(args) -> dict:
    if getattr(args, "config", None):
        return load_experiment_config(args.config)
    return experiment_from_dict({})


def _env_from(args, sections) -> EnvConfig:
    env = sections["env"]
    if getattr(args, "tier", None):
        env = replace(env, tier=args.tier)
    return env


def _eval_params(args, sections) -> tuple[int, int]:
    ev = sections["eval"]
    n = args.episodes if args.episodes is not None else ev.n_episodes
    seed = args.seed if args.seed is not None else ev.seed
    return n, seed


def _load_bundles(parent: str, names) -> dict:
    out = {}
    for name in names:
        path = os.path.join(parent, name)
        if not os.path.isdir(path):
            raise ConfigurationError(
                f"missing checkpoint for mode {name!r}: expected directory {path}")
        out[name] = load_policy_bundle(path)
    return out


def _maybe_motion(path: str | None):
    return load_motion(path) if path else None


def _emit(table, out_dir: str, name: str, extra: dict | None = None) -> None:
    ensure_dir(out_dir)
    txt, csvp = table.write(os.path.join(out_dir, name))
    if extra is not None:
        write_json(os.path.join(out_dir, name + ".json"), extra)
    sys.stdout.write(table.to_text())
    sys.stdout.write(f"wrote {txt} and {csvp}\n")


# --- subcommands ---------------------------------------------------------

def cmd_gen_data(args) -> int:
    sections = _load_sections(args)
    env = _env_from(args, sections)
    _, manifest = generate_dataset(env, args.n, args.seed,
                                   min_length=args.min_length,
                                   out_dir=args.out,
                                   action_noise=args.action_noise,
                                   random_start=args.random_start,
                                   near_start=args.near_start,
                                   pad_terminal=args.pad_terminal)
    print(f"dataset {args.out}: {args.n} episodes, tier {env.tier}, "
          f"hash {manifest['config_hash']}, attempts {manifest['attempts']}")
    return 0


def cmd_train_motion(args) -> int:
    sections = _load_sections(args)
    mcfg = sections["motion"]
    if args.seed is not None:
        mcfg = replace(mcfg, seed=args.seed)
    episodes, manifest = load_dataset(args.data)
    predictor, losses = train_motion(episodes, mcfg)
    save_motion(predictor, args.out)
    print(f"motion checkpoint {args.out}: fingerprint {predictor.fingerprint()[:16]}…, "
          f"final epoch loss {losses[-1]:.6f} (data {manifest['config_hash']})")
    return 0


def cmd_train_policy(args) -> int:
    sections = _load_sections(args)
    train = sections["train"]
    if args.seed is not None:
        train = replace(train, seed=args.seed)
    if args.steps is not None:
        train = replace(train, steps=args.steps)
    episodes = []
    for d in args.data:
        eps, _ = load_dataset(d)
        episodes.extend(eps)
    motion = _maybe_motion(args.motion)
    mode = get_mode(args.mode)
    if mode.motion_on and motion is None:
        raise ConfigurationError(
            f"mode {mode.name!r} uses the motion channel; pass --motion")
    bundle, telem = train_controller(args.mode, episodes, motion,
                                     sections["chunking"], train)
    save_policy_bundle(bundle, args.out)
    write_json(os.path.join(args.out, "telemetry.json"),
               {"mode": args.mode, **telem})
    print(f"policy checkpoint {args.out}: mode {args.mode}, "
          f"final loss {telem['final_loss']:.4f}, hash {bundle.train_hash}")
    return 0


def cmd_eval(args) -> int:
    sections = _load_sections(args)
    env = _env_from(args, sections)
    lat = sections["latency"]
    n, seed = _eval_params(args, sections)
    paused = args.protocol == "paused"
    cells = []
    if args.mode == "oracle":
        cells.append(eval_oracle_rate(env, n, seed))
    else:
        if not args.bundle:
            raise ConfigurationError("eval needs --bundle (or --mode oracle)")
        bundle = load_policy_bundle(args.bundle)
        motion = _maybe_motion(args.motion)
        mode = get_mode(args.mode)
        cells.append(eval_success_rate(
            args.mode, bundle, motion if mode.motion_on else None, env, lat,
            n, seed, paused=paused, trace_dir=args.traces))
    summary = {"cells": [c.__dict__ | {"rate": c.rate} for c in cells]}

    if args.check:
        if args.mode != "tidal" or not args.baseline_bundle:
            raise ConfigurationError(
                "--check compares tidal against the batch controller; use "
                "--mode tidal and pass --baseline-bundle")
        base_bundle = load_policy_bundle(args.baseline_bundle)
        base_cell = eval_success_rate("baseline", base_bundle, None, env, lat,
                                      n, seed, paused=paused)
        cells.append(base_cell)
        ratio = (cells[0].rate / base_cell.rate if base_cell.rate > 0
                 else float("inf") if cells[0].rate > 0 else float("nan"))
        passed = bool(ratio >= args.check_ratio)
        summary = {"tidal_rate": cells[0].rate, "baseline_rate": base_cell.rate,
                   "ratio": ratio, "required_ratio": args.check_ratio,
                   "passed": passed}
        _emit(cells_to_table(cells), args.out, "eval", summary)
        print(f"check: tidal {cells[0].rate:.3f} vs baseline {base_cell.rate:.3f} "
              f"(ratio {ratio:.2f}, need >= {args.check_ratio}): "
              f"{'PASS' if passed else 'FAIL'}")
        return 0 if passed else 1

    _emit(cells_to_table(cells), args.out, "eval", summary)
    return 0


def cmd_ablate(args) -> int:
    sections = _load_sections(args)
    env = _env_from(args, sections)
    lat = sections["latency"]
    n, seed = _eval_params(args, sections)
    bundles = _load_bundles(args.bundles, ABLATION_ORDER)
    motion = _maybe_motion(args.motion)
    cells, checks = ablation_suite(bundles, motion, env, lat, n, seed)
    table = cells_to_table([cells[m] for m in ABLATION_ORDER])
    _emit(table, args.out, "ablation", {"checks": checks})
    print("ordering checks: " + ", ".join(f"{k}={v}" for k, v in checks.items()))
    if args.check and not checks["ok"]:
        return 1
    return 0


def cmd_sweep(args) -> int:
    sections = _load_sections(args)
    env = _env_from(args, sections)
    lat = sections["latency"]
    n, seed = _eval_params(args, sections)
    episodes = []
    for d in args.data:
        eps, _ = load_dataset(d)
        episodes.extend(eps)
    motion = _maybe_motion(args.motion)
    table = hyperparam_sweep(episodes, motion, sections["chunking"],
                             sections["train"], env, lat,
                             budget_frac=args.budget_frac, n_eval=n, seed=seed)
    _emit(table, args.out, "sweep")
    return 0


def cmd_lifespan(args) -> int:
    sections = _load_sections(args)
    env = _env_from(args, sections)
    lat = sections["latency"]
    n, seed = _eval_params(args, sections)
    bundle = load_policy_bundle(args.bundle)
    motion = _maybe_motion(args.motion)
    sweep = lifespan_sweep(bundle, motion, env, lat, n, seed,
                           lifespans=tuple(args.grid))
    _emit(lifespan_table(sweep), args.out, "lifespan",
          {"spearman_rho": sweep["spearman_rho"],
           "reference_lifespan": sweep["reference_lifespan"]})
    print(f"spearman rho(success, lifespan) = {sweep['spearman_rho']:.3f}")
    return 0


def cmd_protocol_compare(args) -> int:
    sections = _load_sections(args)
    env = _env_from(args, sections)
    lat = sections["latency"]
    n, seed = _eval_params(args, sections)
    bundles = _load_bundles(args.bundles, ("tidal", "baseline"))
    motion = _maybe_motion(args.motion)
    cells, report = protocol_compare(bundles, motion, env, lat, n, seed)
    table = cells_to_table([cells[k] for k in sorted(cells, key=str)])
    _emit(table, args.out, "protocols", report)
    print("retention: " + ", ".join(f"{m}={r:.3f}"
                                    for m, r in report["retention"].items()))
    return 0


# --- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dualfreq",
        description="Dual-frequency action-chunk control experiments")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_default):
        sp.add_argument("--config", help="JSON config file with section defaults")
        sp.add_argument("--out", default=out_default, help="output directory")

    sp = sub.add_parser("gen-data", help="generate an expert demonstration dataset")
    common(sp, "runs/data")
    sp.add_argument("--tier", choices=TIERS)
    sp.add_argument("--n", type=int, default=200, help="episodes to keep")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--min-length", type=int, default=28)
    sp.add_argument("--action-noise", type=float, default=0.0,
                    help="execution jitter as a fraction of the step budget; "
                         "labels stay the expert's clean actions")
    sp.add_argument("--random-start", type=float, default=0.0,
                    help="per-episode probability of a uniform random effector "
                         "start pose instead of the canonical one")
    sp.add_argument("--near-start", type=float, default=0.0,
                    help="per-episode probability of starting the effector a "
                         "short random offset from the target")
    sp.add_argument("--pad-terminal", type=int, default=0,
                    help="append this many copies of each episode's final "
                         "record so the closing release is visible at every "
                         "chunk offset")
    sp.set_defaults(fn=cmd_gen_data)

    sp = sub.add_parser("train-motion", help="pretrain the frame-difference motion predictor")
    common(sp, "runs/motion")
    sp.add_argument("--data", required=True, help="dataset directory")
    sp.add_argument("--seed", type=int)
    sp.set_defaults(fn=cmd_train_motion)

    sp = sub.add_parser("train-policy", help="train one controller mode's policy")
    common(sp, "runs/policy")
    sp.add_argument("--data", action="append", required=True,
                    help="dataset directory (repeatable)")
    sp.add_argument("--motion", help="motion checkpoint directory")
    sp.add_argument("--mode", choices=sorted(MODES), default="tidal")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--steps", type=int)
    sp.set_defaults(fn=cmd_train_policy)

    sp = sub.add_parser("eval", help="evaluate one controller cell")
    common(sp, "runs/eval")
    sp.add_argument("--bundle", help="policy checkpoint directory")
    sp.add_argument("--motion")
    sp.add_argument("--mode", choices=sorted(MODES) + ["oracle"], default="tidal")
    sp.add_argument("--tier", choices=TIERS)
    sp.add_argument("--episodes", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--protocol", choices=("paused", "nonpaused"), default="paused")
    sp.add_argument("--traces", help="write per-episode traces to this directory")
    sp.add_argument("--check", action="store_true",
                    help="gate on the interleaved-vs-batch success ratio")
    sp.add_argument("--baseline-bundle", help="batch-controller checkpoint for --check")
    sp.add_argument("--check-ratio", type=float, default=1.5)
    sp.set_defaults(fn=cmd_eval)

    sp = sub.add_parser("ablate", help="run the four-mode ablation grid")
    common(sp, "runs/ablation")
    sp.add_argument("--bundles", required=True,
                    help="directory holding one checkpoint subdirectory per mode")
    sp.add_argument("--motion")
    sp.add_argument("--tier", choices=TIERS)
    sp.add_argument("--episodes", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--check", action="store_true",
                    help="nonzero exit if the ordering checks fail")
    sp.set_defaults(fn=cmd_ablate)

    sp = sub.add_parser("sweep", help="horizon-weight and time-bias sweeps")
    common(sp, "runs/sweep")
    sp.add_argument("--data", action="append", required=True)
    sp.add_argument("--motion")
    sp.add_argument("--tier", choices=TIERS)
    sp.add_argument("--episodes", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--budget-frac", type=float, default=0.2)
    sp.set_defaults(fn=cmd_sweep)

    sp = sub.add_parser("lifespan", help="intent lifespan sweep")
    common(sp, "runs/lifespan")
    sp.add_argument("--bundle", required=True)
    sp.add_argument("--motion")
    sp.add_argument("--tier", choices=TIERS)
    sp.add_argument("--episodes", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--grid", type=int, nargs="+", default=list(LIFESPAN_GRID))
    sp.set_defaults(fn=cmd_lifespan)

    sp = sub.add_parser("protocol-compare", help="paused vs nonpaused retention")
    common(sp, "runs/protocols")
    sp.add_argument("--bundles", required=True)
    sp.add_argument("--motion")
    sp.add_argument("--tier", choices=TIERS)
    sp.add_argument("--episodes", type=int)
    sp.add_argument("--seed", type=int)
    sp.set_defaults(fn=cmd_protocol_compare)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except _ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
