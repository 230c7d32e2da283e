"""Command-line entry points.

Subcommands: ``gen-data`` writes a synthetic demand CSV, ``train-cdppo`` and
``train-ippo`` run training per seed (metrics CSV, checkpoint, manifest, and
a rendered learning curve per run directory), ``fit-baseline`` fits and
executes the classical policies, ``evaluate`` scores a checkpoint, and
``plot`` renders a learning curve from any metrics CSV.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from .baselines import run_baseline, save_baseline_csv
from .config import ExperimentConfig, load_experiment_config
from .data import save_demand_csv, synth_demand
from .errors import ConfigurationError
from .nets import load_params, save_params
from .report import (
    plot_learning_curve,
    read_metrics_csv,
    write_manifest,
    write_metrics_csv,
)
from .rollout import evaluate as evaluate_policy
from .training import train_cdppo, train_ippo


def _add_override_flags(p: argparse.ArgumentParser, *, seeds: bool = True) -> None:
    p.add_argument("--config", required=True, help="experiment TOML file")
    if seeds:
        p.add_argument("--seed", type=int, default=None, help="run a single seed")
    p.add_argument("--out", default=None, help="output directory override")
    p.add_argument("--mode", choices=["paper", "strict"], default=None, help="overflow mode")
    p.add_argument("--reward", choices=["individual", "team"], default=None)
    p.add_argument("--context", choices=["on", "off"], default=None)
    p.add_argument("--aug", choices=["none", "noise", "predictor", "mixed"], default=None)
    p.add_argument("--p-aug", dest="p_aug", type=float, default=None)


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if getattr(args, "mode", None):
        cfg = replace(cfg, overflow_mode=args.mode)
    if getattr(args, "reward", None):
        cfg = replace(cfg, train=replace(cfg.train, team_reward=args.reward == "team"))
    if getattr(args, "context", None):
        cfg = replace(cfg, train=replace(cfg.train, context_features=args.context == "on"))
    if getattr(args, "aug", None):
        cfg = replace(cfg, augment=replace(cfg.augment, mode=args.aug))
    if getattr(args, "p_aug", None) is not None:
        cfg = replace(cfg, augment=replace(cfg.augment, p_aug=args.p_aug))
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seeds=(args.seed,))
    if getattr(args, "out", None):
        cfg = replace(cfg, out_dir=args.out)
    return cfg


def _prepare(cfg: ExperimentConfig):
    dataset = cfg.load_dataset()
    train_ds, test_ds = cfg.split_dataset(dataset)
    store = cfg.build_store(dataset.n)
    return store, train_ds, test_ds


def _cmd_train(args, argv, algo: str) -> int:
    cfg = _apply_overrides(load_experiment_config(args.config), args)
    store, train_ds, test_ds = _prepare(cfg)
    out_root = cfg.resolved_out_dir() if not args.out else args.out
    finals = []
    for seed in cfg.seeds:
        if algo == "cdppo":
            result = train_cdppo(
                store,
                train_ds.demands,
                test_ds.demands,
                cfg.train,
                cfg.augment,
                cfg.context_model,
                seed,
            )
        else:
            result = train_ippo(store, train_ds.demands, test_ds.demands, cfg.train, seed)
        run_dir = os.path.join(out_root, f"{algo}-seed{seed}")
        os.makedirs(run_dir, exist_ok=True)
        write_metrics_csv(result.rows, os.path.join(run_dir, "metrics.csv"))
        plot_learning_curve(
            result.rows, os.path.join(run_dir, "curve.svg"), title=f"{algo} seed {seed}"
        )
        save_params(result.policy, os.path.join(run_dir, "policy.bin"))
        save_params(result.value, os.path.join(run_dir, "value.bin"))
        write_manifest(
            run_dir,
            config_hash=cfg.config_hash,
            seed=seed,
            command=" ".join(argv),
            extra={
                "joint_samples": result.counter.joint_samples,
                "local_samples": result.counter.local_samples,
            },
        )
        finals.append(result.final_profit)
        print(
            f"{algo} seed={seed} final_profit={result.final_profit:.2f} "
            f"joint_samples={result.counter.joint_samples} "
            f"local_samples={result.counter.local_samples} -> {run_dir}"
        )
    print(f"{algo} profit over {len(finals)} seed(s): "
          f"{np.mean(finals):.2f} +/- {np.std(finals):.2f}")
    return 0


def _cmd_fit_baseline(args, argv) -> int:
    cfg = _apply_overrides(load_experiment_config(args.config), args)
    store, train_ds, test_ds = _prepare(cfg)
    variant = "oracle" if args.oracle else args.variant
    kind = "base_stock" if args.policy == "base-stock" else "ss"
    seed = cfg.seeds[0] if args.seed is None else args.seed
    run = run_baseline(kind, variant, train_ds.demands, test_ds.demands, store, seed)
    out_root = cfg.resolved_out_dir() if not args.out else args.out
    os.makedirs(out_root, exist_ok=True)
    params_path = os.path.join(out_root, f"{args.policy}-{variant}-params.csv")
    save_baseline_csv(run, kind, params_path)
    write_manifest(
        out_root,
        config_hash=cfg.config_hash,
        seed=seed,
        command=" ".join(argv),
        extra={"policy": args.policy, "variant": variant},
    )
    print(
        f"fit-baseline policy={args.policy} variant={variant} "
        f"test_profit={run.profit:.2f} discarded_units={run.discarded_units} -> {params_path}"
    )
    return 0


def _cmd_evaluate(args, argv) -> int:
    cfg = _apply_overrides(load_experiment_config(args.config), args)
    store, _, test_ds = _prepare(cfg)
    policy = load_params(args.checkpoint)
    seed = cfg.seeds[0] if args.seed is None else args.seed
    mean, std, totals = evaluate_policy(
        policy,
        store,
        test_ds.demands,
        args.episodes,
        seed,
        cfg.train.policy_spec(),
    )
    print(f"evaluate episodes={args.episodes} profit={mean:.2f} +/- {std:.2f}")
    return 0


def _cmd_gen_data(args) -> int:
    dataset = synth_demand(
        args.n,
        args.len,
        args.seed,
        args.pattern,
        mean=args.mean,
        amplitude=args.amplitude,
        period=args.period,
    )
    save_demand_csv(dataset, args.out)
    print(f"gen-data wrote {dataset.n} SKUs x {dataset.length} days -> {args.out}")
    return 0


def _cmd_plot(args) -> int:
    rows = read_metrics_csv(args.metrics_csv)
    out = args.out or os.path.splitext(args.metrics_csv)[0] + ".svg"
    plot_learning_curve(rows, out, title=os.path.basename(args.metrics_csv))
    print(f"plot {args.metrics_csv} ({len(rows)} rows) -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="restock",
        description="Shared-capacity store replenishment: training, baselines, reports.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-cdppo", help="decoupled context-based PPO training")
    _add_override_flags(p)
    p = sub.add_parser("train-ippo", help="independent PPO training")
    _add_override_flags(p)

    p = sub.add_parser("fit-baseline", help="fit and execute base-stock or (s,S) policies")
    _add_override_flags(p)
    p.add_argument("--policy", choices=["base-stock", "ss"], default="base-stock")
    p.add_argument("--variant", choices=["static", "dynamic", "oracle"], default="static")
    p.add_argument("--oracle", action="store_true", help="shorthand for --variant oracle")

    p = sub.add_parser("evaluate", help="score a saved policy checkpoint")
    _add_override_flags(p)
    p.add_argument("--checkpoint", required=True, help="policy parameter file")
    p.add_argument("--episodes", type=int, default=4)

    p = sub.add_parser("gen-data", help="write a synthetic demand CSV")
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--len", type=int, default=400)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--pattern", choices=["constant", "seasonal", "poisson"], default="seasonal")
    p.add_argument("--mean", type=float, default=6.0)
    p.add_argument("--amplitude", type=float, default=3.0)
    p.add_argument("--period", type=int, default=28)
    p.add_argument("--out", default="demand.csv")

    p = sub.add_parser("plot", help="render a learning curve from a metrics CSV")
    p.add_argument("metrics_csv")
    p.add_argument("--out", default=None)
    return parser


def cli_main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "train-cdppo":
            return _cmd_train(args, argv, "cdppo")
        if args.command == "train-ippo":
            return _cmd_train(args, argv, "ippo")
        if args.command == "fit-baseline":
            return _cmd_fit_baseline(args, argv)
        if args.command == "evaluate":
            return _cmd_evaluate(args, argv)
        if args.command == "gen-data":
            return _cmd_gen_data(args)
        if args.command == "plot":
            return _cmd_plot(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    raise AssertionError("unreachable")


def main() -> None:
    sys.exit(cli_main())
