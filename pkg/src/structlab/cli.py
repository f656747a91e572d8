"""Command-line entry point: ``structlab <command> [options]``."""

from __future__ import annotations

import argparse
import re
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .dynamics import t_star
from .gridworld import distance_grid
from .harness import (
    ExperimentConfig,
    RunResult,
    compare_sampling,
    config_from_pairs,
    config_items,
    export_run,
    parse_config_text,
    plot_curves,
    read_manifest_config,
    read_trace,
    result_grids,
    run_baseline,
    run_many,
    run_seeds,
    spearman,
    tstar_distance_rho,
    write_grid,
)
from .seeds import SeedSelectionError

KEY_HELP = {
    "width": "grid width",
    "height": "grid height",
    "goal_x": "goal column",
    "goal_y": "goal row (row 0 is the top)",
    "step_reward": "reward for every step",
    "max_steps": "episode step cap",
    "v_min": "lowest return atom",
    "v_max": "highest return atom",
    "n_atoms": "number of return atoms",
    "gamma": "discount factor",
    "eta": "mixing rate toward the projected target",
    "epsilon": "exploration rate in the training phase (both arms)",
    "explore_epsilon": "exploration rate in the shared exploration phase",
    "exploration_episodes": "length of the shared exploration phase",
    "training_episodes": "episodes after the exploration phase",
    "start_mode": "training start states: uniform | fixed",
    "eval_every": "greedy evaluation cadence in episodes",
    "eval_start_x": "evaluation start column",
    "eval_start_y": "evaluation start row",
    "capacity": "replay buffer capacity",
    "batch_size": "replay minibatch size",
    "updates_per_step": "replay minibatches per environment step",
    "sigma_reduction": "sigma over actions: greedy | mean",
    "smoothing_window": "moving-average window before locating t*",
    "tau_kernel": "width of the t* sampling kernel",
    "sampling_draws": "state draws per strategy in sampling-demo",
    "sampling_floor": "weight floor in sampling-demo",
    "sampling_episode": "query episode for t* sampling (-1: earliest t*)",
    "seed_strategy": "hybrid | tstar | reward | bellman",
    "k": "number of seed states",
    "stability_window": "final exploration episodes checked for stability",
    "max_changes": "greedy-action changes tolerated by the t* selector",
    "lambda": "direction bias strength",
    "alpha": "replay preference sharpness",
    "weight_floor": "minimum replay weight",
    "struct_policy": "guided (greedy, directed exploration) | direction (always directed)",
    "graph_mode": "observed | complete transition graph for distances",
    "refresh_every": "recompute distances every N training episodes (0: never)",
    "n_random_seeds": "runs per arm unless --seeds is given",
    "rng_seed_base": "first run seed",
}

COMMANDS = {
    "train-baseline": "train the baseline and export its artifacts",
    "train-structrl": "train StructRL and export its artifacts",
    "compare": "train both arms on matched seeds",
    "analyze-dynamics": "t*, sigma and distance grids plus rank correlation",
    "sampling-demo": "visitation grids of the three state-sampling strategies",
    "export-grids": "write per-run grids only",
}


def key_listing() -> str:
    lines = ["config keys (file lines or --set KEY=VALUE):"]
    for key, default in config_items(ExperimentConfig()):
        lines.append(f"  {key:<22} {KEY_HELP[key]} [default: {default}]")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default="default", help="config file, or 'default'")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    common.add_argument("--seeds", type=int, help="number of run seeds (default: n_random_seeds)")
    common.add_argument("--rng-seed-base", type=int, help="first run seed")
    common.add_argument("--jobs", type=int, default=None, help="parallel runs (default: all cores)")
    common.add_argument("--out", default="runs", help="parent directory for run folders")
    common.add_argument("--name", help="run folder name (default: the command)")
    common.add_argument("--plot", action="store_true", help="also write curves.svg (needs matplotlib)")

    parser = argparse.ArgumentParser(
        prog="structlab",
        description="Distributional tabular RL with structure-guided control on a gridworld.",
        epilog=key_listing(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, text in COMMANDS.items():
        p = sub.add_parser(
            name, parents=[common], help=text, description=text,
            epilog=key_listing(), formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        if name == "analyze-dynamics":
            p.add_argument("--run", help="saved run folder to analyse instead of training anew")
        if name == "export-grids":
            p.add_argument("--arms", nargs="+", default=["baseline", "structrl"],
                           choices=["baseline", "structrl"])
    return parser


def resolve_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> ExperimentConfig:
    try:
        text = "" if args.config == "default" else Path(args.config).read_text()
        pairs = parse_config_text(text)
        for item in args.overrides:
            if "=" not in item:
                raise ValueError(f"--set expects KEY=VALUE, got {item!r}")
            key, value = item.split("=", 1)
            pairs.append((key.strip(), value.strip()))
        cfg = config_from_pairs(pairs)
        if args.rng_seed_base is not None:
            cfg = replace(cfg, rng_seed_base=args.rng_seed_base)
        if args.seeds is not None:
            cfg = replace(cfg, n_random_seeds=args.seeds)
    except (OSError, ValueError, KeyError) as exc:
        parser.error(str(exc.args[0]) if isinstance(exc, KeyError) else str(exc))
    return cfg


def summary_line(r: RunResult) -> str:
    strategy = r.seed_manifest.strategy if r.seed_manifest else "-"
    try:
        rho = f"{tstar_distance_rho(r):.3f}"
    except ValueError:
        rho = "nan"
    return f"{r.arm} seed={r.run_seed} final_eval={r.final_eval():g} seeds={strategy} rho={rho}"


def _train(cfg: ExperimentConfig, arms: Sequence[str], out: Path, jobs, plot: bool) -> list[RunResult]:
    results = run_many(cfg, arms, run_seeds(cfg), jobs)
    export_run(out, cfg, results)
    if plot:
        plot_curves(out / "curves.svg", results)
    for r in results:
        print(summary_line(r))
    return results


def _analyze(cfg: ExperimentConfig, args: argparse.Namespace, out: Path) -> None:
    if args.run:
        run_dir = Path(args.run)
        cfg = read_manifest_config(run_dir / "manifest")
        spec = cfg.grid()
        d = distance_grid(spec).reshape(spec.height, spec.width).astype(np.float64)
        paths = sorted(
            (run_dir / "traces").glob("*_sigma.csv"),
            key=lambda p: (p.name.split("_seed")[0], int(re.search(r"seed(-?\d+)", p.name).group(1))),
        )
        if not paths:
            raise FileNotFoundError(f"no traces under {run_dir / 'traces'}")
        for path in paths:
            tag = path.name.removesuffix("_sigma.csv")
            trace = read_trace(path, cfg.sigma_reduction)
            tstar = t_star(trace, spec, cfg.smoothing_window)
            write_grid(out / f"{tag}_tstar.csv", tstar.grid())
            write_grid(out / f"{tag}_sigma_final.csv", trace.sigmas[-1].reshape(d.shape))
            t = np.where(tstar.finite, tstar.t, np.nan).astype(np.float64)
            print(f"{tag} rho={spearman(t.ravel(), d.ravel()):.3f}")
        write_grid(out / "d_true.csv", d.astype(np.int64))
        return
    for seed in run_seeds(cfg):
        r = run_baseline(cfg, seed)
        tag = f"baseline_seed{seed}"
        write_grid(out / f"{tag}_tstar.csv", r.tstar_field.grid())
        write_grid(out / f"{tag}_sigma_final.csv", r.sigma_final.reshape(r.spec.height, r.spec.width))
        print(f"{tag} rho={tstar_distance_rho(r):.3f}")
    spec = cfg.grid()
    write_grid(out / "d_true.csv", distance_grid(spec).reshape(spec.height, spec.width))


def _sampling(cfg: ExperimentConfig, out: Path) -> None:
    for seed in run_seeds(cfg):
        grids = compare_sampling(cfg, seed)
        query = int(grids.pop("query_episode"))
        for strategy, grid in grids.items():
            write_grid(out / f"sampling_seed{seed}_{strategy}.csv", grid)
        modes = " ".join(f"{k}={int(np.argmax(g))}" for k, g in grids.items())
        print(f"sampling seed={seed} query_episode={query} modal_state {modes}")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = resolve_config(args, parser)
    out = Path(args.out) / (args.name or args.command)
    try:
        if args.command in ("train-baseline", "train-structrl", "compare"):
            arms = {"train-baseline": ["baseline"], "train-structrl": ["structrl"]}.get(
                args.command, ["baseline", "structrl"]
            )
            _train(cfg, arms, out, args.jobs, args.plot)
        elif args.command == "export-grids":
            results = run_many(cfg, args.arms, run_seeds(cfg), args.jobs)
            for r in results:
                for kind, grid in result_grids(r).items():
                    write_grid(out / "grids" / f"{r.arm}_seed{r.run_seed}_{kind}.csv", grid)
                print(summary_line(r))
        elif args.command == "analyze-dynamics":
            _analyze(cfg, args, out)
        elif args.command == "sampling-demo":
            _sampling(cfg, out)
    except SeedSelectionError as exc:
        print(f"error: seed selection failed: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
