"""One check per acceptance criterion, each reporting a PASS/FAIL line.

The multi-seed checks share one set of runs under the default configuration.
"""

import time
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from conftest import ACCEPTANCE_LINES
from structlab import distribution as dist
from structlab.c51 import QTable
from structlab.cli import main
from structlab.distribution import Support
from structlab.gridworld import ACTIONS, GridSpec, all_states, distance_grid, step
from structlab.harness import (
    ExperimentConfig,
    compare_sampling,
    phase_one_seeds,
    run_baseline,
    run_seeds,
    run_structrl,
    tstar_distance_rho,
)
from structlab.structrl import ReplayBuffer
from structlab.structure import TransitionGraph, bfs_distance, direction_score, replay_score

CFG = ExperimentConfig()
SEEDS = run_seeds(CFG)
N = len(SEEDS)

RHO_MEDIAN_MIN = 0.5  # pilot: median 0.70, 25th percentile 0.63
RHO_POSITIVE_MIN = 9
PROXIMITY_MIN = 9
WINS_MIN = 8
REACH_MIN = 8


def report(n, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def baseline_runs():
    t0 = time.perf_counter()
    runs = {s: run_baseline(CFG, s) for s in SEEDS}
    return runs, time.perf_counter() - t0


@pytest.fixture(scope="module")
def structrl_runs():
    t0 = time.perf_counter()
    runs = {s: run_structrl(CFG, s) for s in SEEDS}
    return runs, time.perf_counter() - t0


def test_criterion_1_convergence_oracle():
    t0 = time.perf_counter()
    spec, sup = GridSpec(), Support()
    table = QTable(spec, sup, gamma=1.0)
    trans = [step(spec, s, a) for s in all_states(spec) if s != spec.goal for a in ACTIONS]
    while True:
        before = table.probs.copy()
        table.sweep(trans, 1.0)
        if np.array_equal(before, table.probs):
            break
    q = table.all_q().max(axis=1)
    non_goal = np.arange(spec.n_states) != spec.index(spec.goal)
    err = float(np.max(np.abs(q + distance_grid(spec))[non_goal]))
    elapsed = time.perf_counter() - t0
    tol = sup.delta / 2 + 1e-6
    report(1, err <= tol and elapsed < 5, f"max |E[Z]+d| = {err:.4f} <= {tol:.6f}, {elapsed:.2f}s < 5s")


def test_criterion_2_projection_properties():
    rng = np.random.default_rng(0)
    sup = Support()
    probs = rng.dirichlet(np.ones(sup.n_atoms), size=10_000)
    targets = rng.uniform(-130, 30, size=(10_000, sup.n_atoms))
    worst_mass, min_entry = 0.0, np.inf
    t0 = time.perf_counter()
    for t, p in zip(targets, probs):
        out = dist.project(t, p, sup)
        worst_mass = max(worst_mass, abs(out.sum() - 1.0))
        min_entry = min(min_entry, out.min())
    elapsed = time.perf_counter() - t0
    p = rng.dirichlet(np.ones(sup.n_atoms))
    identity = np.array_equal(dist.project(sup.atoms, p, sup), p)
    ok = worst_mass <= 1e-9 and min_entry >= 0 and identity and elapsed < 1
    report(2, ok, f"mass error {worst_mass:.1e} <= 1e-9, min entry {min_entry:.1e} >= 0, "
                  f"on-grid identity {identity}, {elapsed:.2f}s < 1s")


def test_criterion_3_tstar_distance_ordering(baseline_runs):
    runs, elapsed = baseline_runs
    rho = np.array([tstar_distance_rho(runs[s]) for s in SEEDS])
    med, pos = float(np.median(rho)), int(np.sum(rho > 0))
    ok = med >= RHO_MEDIAN_MIN and pos >= RHO_POSITIVE_MIN and elapsed < 120
    report(3, ok, f"median rho {med:.3f} >= {RHO_MEDIAN_MIN}, rho>0 in {pos}/{N} >= {RHO_POSITIVE_MIN}, "
                  f"{elapsed:.1f}s < 120s")


def test_criterion_4_seed_proximity():
    t0 = time.perf_counter()
    spec = CFG.grid()
    d = distance_grid(spec)
    hits = {"tstar": 0, "reward": 0, "bellman": 0}
    for s in SEEDS:
        for name, seed_set in phase_one_seeds(CFG, s).items():
            if seed_set is not None:
                hits[name] += np.mean([d[spec.index(x)] for x in seed_set.states]) < d.mean()
    elapsed = time.perf_counter() - t0
    ok = all(h >= PROXIMITY_MIN for h in hits.values()) and elapsed < 120
    counts = ", ".join(f"{k} {v}/{N}" for k, v in hits.items())
    report(4, ok, f"seed mean distance below all-states mean: {counts} (need >= {PROXIMITY_MIN}), "
                  f"{elapsed:.1f}s < 120s")


def test_criterion_5_structrl_vs_baseline(baseline_runs, structrl_runs):
    base, t_base = baseline_runs
    struct, t_struct = structrl_runs
    target = -1.25 * distance_grid(CFG.grid())[CFG.grid().index(CFG.eval_start)]
    wins = sum(np.mean(struct[s].episodic_returns[-50:]) > np.mean(base[s].episodic_returns[-50:]) for s in SEEDS)
    reached = sum(max(struct[s].eval_returns) >= target for s in SEEDS)
    elapsed = t_base + t_struct
    ok = wins >= WINS_MIN and reached >= REACH_MIN and elapsed < 300
    report(5, ok, f"(a) final-50 wins {wins}/{N} >= {WINS_MIN}, (b) eval >= {target} in {reached}/{N} "
                  f">= {REACH_MIN}, {elapsed:.1f}s < 300s")


def test_criterion_6_phase_one_equivalence(baseline_runs, structrl_runs):
    base, _ = baseline_runs
    struct, _ = structrl_runs
    n = CFG.exploration_episodes
    same = sum(base[s].episodic_returns[:n] == struct[s].episodic_returns[:n] for s in SEEDS)
    report(6, same == N, f"first {n} returns bit-identical in {same}/{N} seeds")


def test_criterion_7_score_invariances():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    invariant = 0
    for _ in range(1000):
        d_s = int(rng.integers(-1, 30))
        succ = rng.integers(-1, 30, size=4)
        best = {int(np.argmax([direction_score(d_s, int(x), lam) for x in succ])) for lam in (0.1, 1.0, 10.0)}
        invariant += len(best) == 1
    pairs = rng.integers(0, 30, size=(1000, 2))
    odd = max(abs(replay_score(a, b, 1.3) + replay_score(b, a, 1.3)) for a, b in pairs)
    spec = GridSpec()
    buf = ReplayBuffer(spec)
    for s in all_states(spec):
        if s != spec.goal:
            for a in ACTIONS:
                buf.push(step(spec, s, a))
    buf.set_field(bfs_distance(spec, TransitionGraph.complete(spec), [spec.goal]), 50.0, 0.05)
    floor_ok = bool(np.all(buf.entry_weights() >= 0.05))
    elapsed = time.perf_counter() - t0
    ok = invariant == 1000 and odd <= 1e-12 and floor_ok and elapsed < 1
    report(7, ok, f"argmax invariant {invariant}/1000, max |score(a,b)+score(b,a)| {odd:.1e} <= 1e-12, "
                  f"all weights >= floor {floor_ok}, {elapsed:.2f}s < 1s")


def test_criterion_8_bfs_oracle():
    spec = GridSpec()
    d = bfs_distance(spec, TransitionGraph.complete(spec), [spec.goal])
    manhattan = np.array([abs(s.x - spec.goal.x) + abs(s.y - spec.goal.y) for s in all_states(spec)])
    same = int(np.sum(d.d == manhattan))
    report(8, same == spec.n_states, f"bfs distance equals Manhattan distance on {same}/{spec.n_states} states")


def test_criterion_9_sampling_demo(baseline_runs):
    runs, _ = baseline_runs
    seed = SEEDS[0]
    r = runs[seed]
    grids = compare_sampling(CFG, seed, r)
    counts = grids["uniform"].ravel() * CFG.sampling_draws
    p = float(stats.chisquare(counts).pvalue)
    sigma_ok = r.sigma_final[int(np.argmax(grids["sigma"]))] == r.sigma_final.max()
    t = np.where(r.tstar_field.finite, r.tstar_field.t, np.inf).ravel().astype(float)
    gap = np.abs(t - int(grids["query_episode"]))
    tstar_ok = gap[int(np.argmax(grids["tstar"]))] == gap.min()
    ok = p > 0.001 and sigma_ok and tstar_ok and {"uniform", "sigma", "tstar"} <= set(grids)
    report(9, ok, f"uniform chi2 p={p:.3f} > 0.001, sigma mode at max sigma {sigma_ok}, "
                  f"t* mode nearest query episode {tstar_ok}")


def test_criterion_10_determinism(tmp_path, capsys):
    quick = ["--seeds", "2", "--jobs", "1", "--set", "training_episodes=20"]
    commands = ["train-baseline", "train-structrl", "compare", "analyze-dynamics", "sampling-demo", "export-grids"]
    identical = 0
    for cmd in commands:
        outputs = []
        for rerun in ("first", "second"):
            assert main([cmd, *quick, "--out", str(tmp_path / rerun)]) == 0
            folder = tmp_path / rerun / cmd
            outputs.append({p.relative_to(folder): p.read_bytes() for p in sorted(folder.rglob("*.csv"))})
        identical += bool(outputs[0]) and outputs[0] == outputs[1]
    capsys.readouterr()
    report(10, identical == len(commands), f"byte-identical CSVs on rerun for {identical}/{len(commands)} commands")
