"""Render the figure set from one matched comparison.

Panels: t* and sigma heat maps with the structural distance contours, the
sampling-strategy visitation grids, and mean learning curves per arm.

    python scripts/reproduce_figures.py --out figures --seed 0
"""

import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from structlab.harness import (
    ExperimentConfig,
    aggregate,
    compare_sampling,
    run_baseline,
    run_seeds,
    run_structrl,
)


def heat(ax, grid, title, contour=None):
    im = ax.imshow(grid, cmap="viridis")
    if contour is not None:
        ax.contour(np.where(contour < 0, np.nan, contour), colors="white", linewidths=0.8)
    ax.set_title(title)
    ax.set_xticks([])
    ax.set_yticks([])
    plt.colorbar(im, ax=ax, fraction=0.046)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="figures")
    ap.add_argument("--seed", type=int, default=0, help="run shown in the heat maps")
    ap.add_argument("--seeds", type=int, default=10, help="runs per arm in the learning curves")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = ExperimentConfig()
    matplotlib.rcParams["svg.hashsalt"] = "structlab"

    base = {s: run_baseline(cfg, s) for s in run_seeds(cfg, args.seeds)}
    struct = {s: run_structrl(cfg, s) for s in run_seeds(cfg, args.seeds)}
    b, s = base[args.seed], struct[args.seed]
    shape = (b.spec.height, b.spec.width)

    fig, axes = plt.subplots(1, 3, figsize=(12, 3.6))
    tstar = np.where(b.tstar_field.finite, b.tstar_field.t, np.nan).reshape(shape)
    heat(axes[0], tstar, "t* (baseline)")
    heat(axes[1], b.sigma_final.reshape(shape), "final sigma (baseline)")
    heat(axes[2], np.where(s.distance_field.grid() < 0, np.nan, s.distance_field.grid()),
         f"structural distance, seeds: {s.seed_manifest.strategy}", s.distance_field.grid())
    fig.tight_layout()
    fig.savefig(out / "dynamics.svg", metadata={"Date": None})

    grids = compare_sampling(cfg, args.seed, b)
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.6))
    for ax, name in zip(axes, ("uniform", "sigma", "tstar")):
        heat(ax, grids[name], f"{name} sampling")
    fig.tight_layout()
    fig.savefig(out / "sampling.svg", metadata={"Date": None})

    fig, ax = plt.subplots(figsize=(6, 4))
    for arm, runs in (("baseline", base), ("StructRL", struct)):
        summary = aggregate(list(runs.values()))
        ax.plot(summary.eval_episodes, summary.eval_mean, label=arm)
        ax.fill_between(summary.eval_episodes, summary.eval_q25, summary.eval_q75, alpha=0.25)
    ax.axvline(cfg.exploration_episodes, color="grey", linestyle=":")
    ax.set_xlabel("episode")
    ax.set_ylabel(f"greedy return from {tuple(cfg.eval_start)}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "curves.svg", metadata={"Date": None})
    print(f"wrote {sorted(p.name for p in out.glob('*.svg'))}")


if __name__ == "__main__":
    main()
