"""Pilot sweep used to freeze the multi-seed acceptance thresholds.

Runs the baseline once per seed, then StructRL for every (lambda, alpha) pair,
and prints the statistics behind the rank-correlation, seed-proximity and
StructRL-vs-baseline checks.

    python scripts/pilot_sweep.py --seeds 10 --grid 0.5 1 2
"""

import argparse
import itertools
import time
from dataclasses import replace

import numpy as np

from structlab.gridworld import distance_grid
from structlab.harness import (
    ExperimentConfig,
    phase_one_seeds,
    run_baseline,
    run_structrl,
    tstar_distance_rho,
)


def final_mean(result, n=50):
    return float(np.mean(result.episodic_returns[-n:]))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--grid", type=float, nargs="+", default=[0.5, 1.0, 2.0])
    ap.add_argument("--policy", default="guided", choices=["guided", "direction"])
    args = ap.parse_args()

    cfg = ExperimentConfig(struct_policy=args.policy)
    seeds = range(cfg.rng_seed_base, cfg.rng_seed_base + args.seeds)
    d = distance_grid(cfg.grid()).ravel()
    spec = cfg.grid()

    t0 = time.perf_counter()
    base = {s: run_baseline(cfg, s) for s in seeds}
    rho = np.array([tstar_distance_rho(base[s]) for s in seeds])
    print(f"baseline: {(time.perf_counter() - t0) / args.seeds:.2f} s/run")
    print(f"rho: {np.round(rho, 3).tolist()}")
    print(f"rho median={np.median(rho):.3f} p25={np.percentile(rho, 25):.3f} positive={np.sum(rho > 0)}")

    near = {name: [] for name in ("tstar", "reward", "bellman")}
    for s in seeds:
        for name, seed_set in phase_one_seeds(cfg, s).items():
            if seed_set is not None:
                mean_d = np.mean([d[spec.index(x)] for x in seed_set.states])
                near[name].append(mean_d < d.mean())
    for name, hits in near.items():
        print(f"seeds {name}: {sum(hits)}/{len(hits)} below the all-states mean distance")

    target = -1.25 * float(d[spec.index(cfg.eval_start)])
    for lam, alpha in itertools.product(args.grid, args.grid):
        run_cfg = replace(cfg, lam=lam, alpha=alpha)
        t0 = time.perf_counter()
        wins = reached = 0
        gaps = []
        for s in seeds:
            r = run_structrl(run_cfg, s)
            gap = final_mean(r) - final_mean(base[s])
            gaps.append(gap)
            wins += gap > 0
            reached += max(r.eval_returns) >= target
        print(
            f"lam={lam} alpha={alpha}: wins={wins}/{args.seeds} reached={reached}/{args.seeds} "
            f"mean_gap={np.mean(gaps):.2f} {(time.perf_counter() - t0) / args.seeds:.2f} s/run",
            flush=True,
        )


if __name__ == "__main__":
    main()
