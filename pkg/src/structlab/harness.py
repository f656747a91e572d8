"""Experiment orchestration: baseline C51, the two-phase structured protocol,
multi-seed aggregation and artifact export.

Both arms share one training loop. Phase 1 (``exploration_episodes``) is
identical for the two arms under a given run seed; in phase 2 the structured
arm swaps epsilon-greedy action choice and uniform replay for distance-biased
sampling. Randomness comes from three named streams per run (env, policy,
replay), each derived from the run seed alone.
"""

from __future__ import annotations

import csv
import io
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .c51 import QTable
from .distribution import Support
from .dynamics import (
    NEVER,
    SigmaTrace,
    StabilityTrace,
    TStarField,
    sampling_weights,
    stability_counts,
    t_star,
)
from .gridworld import N_ACTIONS, GridSpec, State, distance_grid, successor_table
from .seeds import SeedSelectionError, SeedSet, seeds_from_bellman, seeds_from_reward, seeds_from_tstar, seeds_hybrid
from .structrl import ReplayBuffer, StructPolicyParams, action_probabilities
from .structure import DistanceField, TransitionGraph, bfs_distance

ARMS = ("baseline", "structrl")
SEED_STRATEGIES = ("hybrid", "tstar", "reward", "bellman")
STRUCT_POLICIES = ("guided", "direction")
_STREAMS = {"env": 0, "policy": 1, "replay": 2, "sampling": 3}


@dataclass
class ExperimentConfig:
    """Every tunable of a run. Keys double as config-file / ``--set`` names."""

    # grid
    width: int = 10
    height: int = 10
    goal_x: int = 0
    goal_y: int = 0
    step_reward: float = -1.0
    max_steps: int = 100
    # return support
    v_min: float = -100.0
    v_max: float = 0.0
    n_atoms: int = 51
    # learning
    gamma: float = 1.0
    eta: float = 0.3
    epsilon: float = 0.1
    explore_epsilon: float = 0.1
    # schedule
    exploration_episodes: int = 30
    training_episodes: int = 300
    start_mode: str = "uniform"
    eval_every: int = 5
    eval_start_x: int = 9
    eval_start_y: int = 9
    # replay
    capacity: int = 50_000
    batch_size: int = 4
    updates_per_step: int = 1
    # dynamics
    sigma_reduction: str = "greedy"
    smoothing_window: int = 3
    tau_kernel: float = 5.0
    sampling_draws: int = 100_000
    sampling_floor: float = 1e-3
    sampling_episode: int = -1
    # seeds
    seed_strategy: str = "hybrid"
    k: int = 5
    stability_window: int = 5
    max_changes: int = 1
    # structured control
    lam: float = 1.0
    alpha: float = 1.0
    weight_floor: float = 0.05
    struct_policy: str = "guided"
    graph_mode: str = "observed"
    refresh_every: int = 0
    # experiment
    n_random_seeds: int = 10
    rng_seed_base: int = 0

    def __post_init__(self) -> None:
        if self.exploration_episodes < 2:
            raise ValueError("exploration_episodes must be >= 2")
        if self.training_episodes < 0:
            raise ValueError("training_episodes must be >= 0")
        if not 0.0 <= self.epsilon <= 1.0 or not 0.0 <= self.explore_epsilon <= 1.0:
            raise ValueError("epsilon values must lie in [0, 1]")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("eta must lie in (0, 1]")
        if self.start_mode not in ("uniform", "fixed"):
            raise ValueError(f"start_mode must be uniform or fixed, got {self.start_mode!r}")
        if self.sigma_reduction not in ("greedy", "mean"):
            raise ValueError(f"sigma_reduction must be greedy or mean, got {self.sigma_reduction!r}")
        if self.seed_strategy not in SEED_STRATEGIES:
            raise ValueError(f"seed_strategy must be one of {SEED_STRATEGIES}")
        if self.struct_policy not in STRUCT_POLICIES:
            raise ValueError(f"struct_policy must be one of {STRUCT_POLICIES}")
        if self.graph_mode not in ("observed", "complete"):
            raise ValueError(f"graph_mode must be observed or complete, got {self.graph_mode!r}")
        if self.stability_window > self.exploration_episodes:
            raise ValueError("stability_window cannot exceed exploration_episodes")
        if min(self.k, self.batch_size, self.updates_per_step, self.eval_every, self.capacity) < 1:
            raise ValueError("k, batch_size, updates_per_step, eval_every, capacity must be >= 1")
        # constructing these validates their own invariants
        self.grid()
        self.support()
        self.struct_params()

    def grid(self) -> GridSpec:
        return GridSpec(
            self.width, self.height, State(self.goal_x, self.goal_y), self.step_reward, self.max_steps
        )

    def support(self) -> Support:
        return Support(self.v_min, self.v_max, self.n_atoms)

    def struct_params(self) -> StructPolicyParams:
        return StructPolicyParams(self.lam, self.alpha, self.epsilon, self.weight_floor)

    @property
    def eval_start(self) -> State:
        return State(self.eval_start_x, self.eval_start_y)

    @property
    def total_episodes(self) -> int:
        return self.exploration_episodes + self.training_episodes


@dataclass
class RunResult:
    arm: str
    run_seed: int
    spec: GridSpec
    episodic_returns: list[float]
    eval_episodes: list[int]
    eval_returns: list[float]
    trace: SigmaTrace
    tstar_field: TStarField
    sigma_final: np.ndarray
    visitation: np.ndarray
    replay_counts: np.ndarray
    distance_field: DistanceField | None = None
    seed_manifest: SeedSet | None = None
    tstar_explore: TStarField | None = None
    stability: np.ndarray | None = None
    wall_time: float = 0.0
    successes: list[bool] = field(default_factory=list)

    @property
    def reached_goal(self) -> np.ndarray:
        return np.asarray(self.successes, dtype=bool)

    def final_eval(self) -> float:
        return self.eval_returns[-1]


def rng_streams(run_seed: int) -> dict[str, np.random.Generator]:
    return {
        name: np.random.default_rng(np.random.SeedSequence([int(run_seed), key]))
        for name, key in _STREAMS.items()
    }


def evaluate_greedy(table: QTable, spec: GridSpec, start: State) -> float:
    """Return of a greedy rollout from ``start``, truncated at ``max_steps``."""
    succ = successor_table(spec)
    goal = spec.index(spec.goal)
    i = spec.index(start)
    total = 0.0
    q = table.all_q()
    for _ in range(spec.max_steps):
        if i == goal:
            break
        i = int(succ[i, int(np.argmax(q[i]))])
        total += spec.step_reward
    return total


class _Trainer:
    """Mutable state of one run."""

    def __init__(self, cfg: ExperimentConfig, run_seed: int):
        self.cfg = cfg
        self.spec = cfg.grid()
        self.table = QTable(self.spec, cfg.support(), cfg.gamma)
        self.buffer = ReplayBuffer(self.spec, cfg.capacity)
        self.rng = rng_streams(run_seed)
        self.succ = successor_table(self.spec)
        self.goal = self.spec.index(self.spec.goal)
        self.non_goal = np.array([i for i in range(self.spec.n_states) if i != self.goal])
        self.trace = SigmaTrace(reduction=cfg.sigma_reduction)
        self.stab = StabilityTrace()
        self.returns: list[float] = []
        self.successes: list[bool] = []
        self.eval_episodes: list[int] = []
        self.eval_returns: list[float] = []
        self.visits = np.zeros(self.spec.n_states, dtype=np.int64)
        self.replay_counts = np.zeros(self.spec.n_states, dtype=np.int64)
        self.trace.record(0, self.table)

    def start_state(self) -> int:
        if self.cfg.start_mode == "fixed":
            return self.spec.index(self.cfg.eval_start)
        return int(self.non_goal[self.rng["env"].integers(len(self.non_goal))])

    def episode(
        self,
        choose: Callable[[int], int],
        sample: Callable[[int], np.ndarray],
        count_replay: bool,
    ) -> None:
        cfg, spec = self.cfg, self.spec
        i = self.start_state()
        ret = 0.0
        for _ in range(spec.max_steps):
            a = choose(i)
            j = int(self.succ[i, a])
            done = j == self.goal
            self.visits[i] += 1
            self.buffer.push_index(i, a, spec.step_reward, j, done)
            ret += spec.step_reward
            for _ in range(cfg.updates_per_step):
                slots = sample(cfg.batch_size)
                s, a_, r, s2, term = self.buffer.arrays(slots)
                if count_replay:
                    np.add.at(self.replay_counts, s, 1)
                self.table.update_batch(s, a_, r, s2, term, cfg.eta)
            i = j
            if done:
                break
        self.returns.append(ret)
        self.successes.append(i == self.goal)
        n = len(self.returns)
        self.trace.record(n, self.table)
        self.stab.record(n, self.table)
        if n % cfg.eval_every == 0 or n == cfg.total_episodes:
            self.eval_episodes.append(n)
            self.eval_returns.append(evaluate_greedy(self.table, spec, cfg.eval_start))

    def epsilon_greedy(self, epsilon: float) -> Callable[[int], int]:
        rng = self.rng["policy"]
        return lambda i: self.table.act(i, epsilon, rng)

    def uniform_replay(self) -> Callable[[int], np.ndarray]:
        rng = self.rng["replay"]
        return lambda n: self.buffer.sample_uniform(n, rng)

    def result(self, arm: str, run_seed: int, started: float, **extra: Any) -> RunResult:
        cfg = self.cfg
        return RunResult(
            arm=arm,
            run_seed=run_seed,
            spec=self.spec,
            episodic_returns=self.returns,
            eval_episodes=self.eval_episodes,
            eval_returns=self.eval_returns,
            trace=self.trace,
            tstar_field=t_star(self.trace, self.spec, cfg.smoothing_window),
            sigma_final=self.trace.sigmas[-1],
            visitation=self.visits,
            replay_counts=self.replay_counts,
            wall_time=time.perf_counter() - started,
            successes=self.successes,
            **extra,
        )


def _explore(tr: _Trainer) -> None:
    choose = tr.epsilon_greedy(tr.cfg.explore_epsilon)
    sample = tr.uniform_replay()
    for _ in range(tr.cfg.exploration_episodes):
        tr.episode(choose, sample, count_replay=False)


def run_baseline(cfg: ExperimentConfig, run_seed: int) -> RunResult:
    started = time.perf_counter()
    tr = _Trainer(cfg, run_seed)
    _explore(tr)
    choose = tr.epsilon_greedy(cfg.epsilon)
    sample = tr.uniform_replay()
    for _ in range(cfg.training_episodes):
        tr.episode(choose, sample, count_replay=True)
    return tr.result("baseline", run_seed, started)


def select_seeds(
    cfg: ExperimentConfig,
    tstar: TStarField,
    stability: np.ndarray,
    table: QTable,
    transitions: list,
) -> SeedSet:
    selectors = {
        "tstar": lambda: seeds_from_tstar(tstar, stability, cfg.k, cfg.max_changes),
        "reward": lambda: seeds_from_reward(transitions, cfg.k),
        "bellman": lambda: seeds_from_bellman(table, transitions, cfg.k),
    }
    if cfg.seed_strategy == "hybrid":
        return seeds_hybrid([(n, selectors[n]) for n in ("tstar", "reward", "bellman")])
    return selectors[cfg.seed_strategy]()


def exploration_summary(tr: _Trainer) -> tuple[TStarField, np.ndarray]:
    cfg = tr.cfg
    phase1 = tr.trace.truncated(cfg.exploration_episodes + 1)
    return (
        t_star(phase1, tr.spec, cfg.smoothing_window),
        stability_counts(tr.stab, cfg.stability_window),
    )


def phase_one_seeds(cfg: ExperimentConfig, run_seed: int) -> dict[str, SeedSet | None]:
    """Seed sets each single strategy would pick after phase 1 (None if it fails)."""
    tr = _Trainer(cfg, run_seed)
    _explore(tr)
    tstar, stability = exploration_summary(tr)
    out: dict[str, SeedSet | None] = {}
    for name in ("tstar", "reward", "bellman"):
        try:
            out[name] = select_seeds(
                replace(cfg, seed_strategy=name), tstar, stability, tr.table, tr.buffer.entries
            )
        except SeedSelectionError:
            out[name] = None
    return out


def _policy_table(spec: GridSpec, field: DistanceField, params: StructPolicyParams) -> np.ndarray:
    probs = np.zeros((spec.n_states, N_ACTIONS))
    for i in range(spec.n_states):
        s = spec.state_at(i)
        if s != spec.goal:
            probs[i] = action_probabilities(spec, s, field, params)
    return probs


def _graph(cfg: ExperimentConfig, spec: GridSpec, buffer: ReplayBuffer) -> TransitionGraph:
    if cfg.graph_mode == "complete":
        return TransitionGraph.complete(spec)
    return TransitionGraph.from_transitions(buffer.entries)


def run_structrl(cfg: ExperimentConfig, run_seed: int) -> RunResult:
    started = time.perf_counter()
    tr = _Trainer(cfg, run_seed)
    _explore(tr)

    tstar, stability = exploration_summary(tr)
    seeds = select_seeds(cfg, tstar, stability, tr.table, tr.buffer.entries)
    spec = tr.spec
    params = cfg.struct_params()
    field = bfs_distance(spec, _graph(cfg, spec, tr.buffer), seeds.states)
    state = {"policy": _policy_table(spec, field, params)}
    tr.buffer.set_field(field, params.alpha, params.weight_floor)

    policy_rng = tr.rng["policy"]
    replay_rng = tr.rng["replay"]

    def directed(i: int) -> int:
        # same draw sequence as structrl.select_action
        if params.epsilon > 0.0 and policy_rng.random() < params.epsilon:
            return int(policy_rng.integers(N_ACTIONS))
        return int(policy_rng.choice(N_ACTIONS, p=state["policy"][i]))

    def guided(i: int) -> int:
        # greedy on the learned values; exploratory moves go through the directed sampler
        if policy_rng.random() < cfg.epsilon:
            return directed(i)
        return int(np.argmax(tr.table.probs[i] @ tr.table.sup.atoms))

    choose = guided if cfg.struct_policy == "guided" else directed

    def sample(n: int) -> np.ndarray:
        return tr.buffer.sample_weighted(n, replay_rng)

    for ep in range(cfg.training_episodes):
        if cfg.refresh_every and ep > 0 and ep % cfg.refresh_every == 0:
            field = bfs_distance(spec, _graph(cfg, spec, tr.buffer), seeds.states)
            state["policy"] = _policy_table(spec, field, params)
            tr.buffer.set_field(field, params.alpha, params.weight_floor)
        tr.episode(choose, sample, count_replay=True)

    return tr.result(
        "structrl",
        run_seed,
        started,
        distance_field=field,
        seed_manifest=seeds,
        tstar_explore=tstar,
        stability=stability,
    )


RUNNERS = {"baseline": run_baseline, "structrl": run_structrl}


def _run_one(job: tuple[str, ExperimentConfig, int]) -> RunResult:
    arm, cfg, seed = job
    return RUNNERS[arm](cfg, seed)


def run_many(
    cfg: ExperimentConfig, arms: Sequence[str], seeds: Sequence[int], jobs: int | None = None
) -> list[RunResult]:
    """Run every (arm, seed) pair; results come back in (arm, seed) order."""
    work = [(arm, cfg, s) for arm in arms for s in seeds]
    jobs = jobs or os.cpu_count() or 1
    if jobs <= 1 or len(work) == 1:
        return [_run_one(w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_one, work))


def run_seeds(cfg: ExperimentConfig, n: int | None = None) -> list[int]:
    return [cfg.rng_seed_base + i for i in range(cfg.n_random_seeds if n is None else n)]


# -- analysis ---------------------------------------------------------------


def rankdata(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties given their average rank."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x))
    xs = x[order]
    start = 0
    for end in range(1, len(x) + 1):
        if end == len(x) or xs[end] != xs[start]:
            ranks[order[start:end]] = (start + end + 1) / 2.0
            start = end
    return ranks


def spearman(xs: Any, ys: Any) -> float:
    """Spearman rank correlation over the states where both inputs are finite.

    Accepts dicts keyed by state or equal-length arrays; NaN marks a missing
    value in arrays.
    """
    if isinstance(xs, dict):
        common = [k for k in xs if k in ys]
        x = np.array([xs[k] for k in common], dtype=np.float64)
        y = np.array([ys[k] for k in common], dtype=np.float64)
    else:
        x = np.asarray(xs, dtype=np.float64)
        y = np.asarray(ys, dtype=np.float64)
    ok = np.isfinite(x) & np.isfinite(y)
    x, y = x[ok], y[ok]
    if len(x) < 3:
        raise ValueError(f"spearman needs >= 3 common finite points, got {len(x)}")
    rx, ry = rankdata(x), rankdata(y)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = np.sqrt((rx**2).sum() * (ry**2).sum())
    if denom == 0:
        raise ValueError("spearman undefined for a constant input")
    return float(np.clip((rx * ry).sum() / denom, -1.0, 1.0))


def tstar_distance_rho(result: RunResult, tstar: TStarField | None = None) -> float:
    """Rank correlation between finite t*(s) and true distance-to-goal."""
    tstar = tstar or result.tstar_field
    t = np.where(tstar.t == NEVER, np.nan, tstar.t.astype(np.float64))
    return spearman(t, distance_grid(result.spec).astype(np.float64))


def compare_sampling(
    cfg: ExperimentConfig, run_seed: int, result: RunResult | None = None
) -> dict[str, np.ndarray]:
    """Visitation grids from drawing states under the uniform, sigma and t* weightings."""
    if result is None:
        result = run_baseline(cfg, run_seed)
    spec = result.spec
    tstar = result.tstar_field
    query = cfg.sampling_episode
    if query < 0:
        finite = tstar.t[tstar.finite]
        query = int(finite.min()) if finite.size else 0
    rng = rng_streams(run_seed)["sampling"]
    grids = {}
    for strategy in ("uniform", "sigma", "tstar"):
        w = sampling_weights(
            strategy, result.sigma_final, tstar, query, cfg.tau_kernel, cfg.sampling_floor
        )
        draws = rng.choice(spec.n_states, size=cfg.sampling_draws, p=w)
        counts = np.bincount(draws, minlength=spec.n_states)
        grids[strategy] = (counts / cfg.sampling_draws).reshape(spec.height, spec.width)
    grids["query_episode"] = np.array(query)
    return grids


@dataclass
class Summary:
    episodes: np.ndarray
    mean: np.ndarray
    median: np.ndarray
    q25: np.ndarray
    q75: np.ndarray
    success_rate: np.ndarray
    eval_episodes: np.ndarray
    eval_mean: np.ndarray
    eval_q25: np.ndarray
    eval_q75: np.ndarray

    @property
    def iqr(self) -> np.ndarray:
        return self.q75 - self.q25

    def rows(self) -> list[dict[str, float]]:
        out = []
        ev = dict(zip(self.eval_episodes.tolist(), self.eval_mean.tolist()))
        for i, ep in enumerate(self.episodes.tolist()):
            out.append(
                {
                    "episode": ep,
                    "mean": self.mean[i],
                    "median": self.median[i],
                    "q25": self.q25[i],
                    "q75": self.q75[i],
                    "success_rate": self.success_rate[i],
                    "eval_mean": ev.get(ep, ""),
                }
            )
        return out


def aggregate(results: Sequence[RunResult]) -> Summary:
    if not results:
        raise ValueError("nothing to aggregate")
    returns = np.array([r.episodic_returns for r in results], dtype=np.float64)
    success = np.array([r.reached_goal for r in results], dtype=np.float64)
    evals = np.array([r.eval_returns for r in results], dtype=np.float64)
    q25, med, q75 = np.percentile(returns, [25, 50, 75], axis=0)
    e25, e75 = np.percentile(evals, [25, 75], axis=0)
    return Summary(
        episodes=np.arange(1, returns.shape[1] + 1),
        mean=returns.mean(axis=0),
        median=med,
        q25=q25,
        q75=q75,
        success_rate=success.mean(axis=0),
        eval_episodes=np.asarray(results[0].eval_episodes),
        eval_mean=evals.mean(axis=0),
        eval_q25=e25,
        eval_q75=e75,
    )


# -- export -----------------------------------------------------------------


def _fmt(v: Any) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def config_items(cfg: ExperimentConfig) -> list[tuple[str, Any]]:
    return [(config_key(f.name), getattr(cfg, f.name)) for f in fields(cfg)]


def config_key(name: str) -> str:
    return "lambda" if name == "lam" else name


def field_name(key: str) -> str:
    return "lam" if key == "lambda" else key


def grid_csv(grid: np.ndarray) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in np.asarray(grid):
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_grid(path: Path, grid: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(grid_csv(grid))


def result_grids(result: RunResult) -> dict[str, np.ndarray]:
    spec = result.spec
    shape = (spec.height, spec.width)
    grids = {
        "d_true": distance_grid(spec).reshape(shape),
        "sigma_final": result.sigma_final.reshape(shape),
        "tstar": result.tstar_field.grid(),
        "visitation": result.visitation.reshape(shape),
        "replay": result.replay_counts.reshape(shape),
    }
    if result.distance_field is not None:
        grids["d"] = result.distance_field.grid()
    if result.tstar_explore is not None:
        grids["tstar_explore"] = result.tstar_explore.grid()
    return grids


def write_manifest(path: Path, cfg: ExperimentConfig, results: Iterable[RunResult]) -> None:
    lines = ["# resolved configuration"]
    lines += [f"{k} = {_fmt(v)}" for k, v in config_items(cfg)]
    lines.append("")
    lines.append("# runs")
    for r in results:
        tag = f"{r.arm}.seed{r.run_seed}"
        lines.append(f"{tag}.final_eval_return = {_fmt(r.final_eval())}")
        if r.seed_manifest is not None:
            lines.append(f"{tag}.seed_strategy = {r.seed_manifest.strategy}")
            states = " ".join(f"{s.x},{s.y}" for s in r.seed_manifest.states)
            lines.append(f"{tag}.seed_states = {states}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")


def write_returns(path: Path, results: Iterable[RunResult]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["episode", "run_seed", "arm", "return", "eval_return"])
        for r in results:
            ev = dict(zip(r.eval_episodes, r.eval_returns))
            for ep, ret in enumerate(r.episodic_returns, start=1):
                writer.writerow([ep, r.run_seed, r.arm, _fmt(ret), _fmt(ev[ep]) if ep in ev else ""])


def write_trace(path: Path, trace: SigmaTrace) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        n = len(trace.sigmas[0])
        writer.writerow(["episode"] + [f"s{i}" for i in range(n)])
        for ep, sig in zip(trace.episodes, trace.sigmas):
            writer.writerow([ep] + [_fmt(v) for v in sig])


def read_trace(path: Path, reduction: str = "greedy") -> SigmaTrace:
    trace = SigmaTrace(reduction=reduction)
    with open(path, newline="") as f:
        reader = csv.reader(f)
        next(reader)
        for row in reader:
            trace.record_sigma(int(row[0]), np.array([float(v) for v in row[1:]]))
    return trace


def write_summary(path: Path, summary: Summary, arm: str) -> None:
    rows = summary.rows()
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=["arm"] + list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({"arm": arm, **{k: _fmt(v) for k, v in row.items()}})


def export_run(out_dir: Path, cfg: ExperimentConfig, results: Sequence[RunResult]) -> None:
    """Write manifest, returns, per-run grids and traces, and per-arm summaries."""
    out_dir = Path(out_dir)
    write_manifest(out_dir / "manifest", cfg, results)
    write_returns(out_dir / "returns.csv", results)
    for r in results:
        for kind, grid in result_grids(r).items():
            write_grid(out_dir / "grids" / f"{r.arm}_seed{r.run_seed}_{kind}.csv", grid)
        write_trace(out_dir / "traces" / f"{r.arm}_seed{r.run_seed}_sigma.csv", r.trace)
    for arm in ARMS:
        arm_results = [r for r in results if r.arm == arm]
        if arm_results:
            write_summary(out_dir / f"summary_{arm}.csv", aggregate(arm_results), arm)


def plot_curves(path: Path, results: Sequence[RunResult]) -> None:
    """Mean eval return per arm with an IQR band (needs matplotlib)."""
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "structlab"
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for arm in ARMS:
        arm_results = [r for r in results if r.arm == arm]
        if not arm_results:
            continue
        s = aggregate(arm_results)
        ax.plot(s.episodes, s.mean, label=f"{arm} (training return)")
        ax.fill_between(s.episodes, s.q25, s.q75, alpha=0.25)
    ax.set_xlabel("episode")
    ax.set_ylabel("return")
    ax.legend()
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def config_from_pairs(pairs: Iterable[tuple[str, str]], base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Apply ``key = value`` string pairs on top of ``base`` (defaults if omitted)."""
    base = base or ExperimentConfig()
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    values = asdict(base)
    for key, raw in pairs:
        name = field_name(key.strip())
        if name not in types:
            raise KeyError(f"unknown config key {key!r}")
        current = values[name]
        raw = raw.strip()
        if isinstance(current, bool):
            values[name] = raw.lower() in ("1", "true", "yes")
        elif isinstance(current, int):
            values[name] = int(raw)
        elif isinstance(current, float):
            values[name] = float(raw)
        else:
            values[name] = raw
    return ExperimentConfig(**values)


def read_manifest_config(path: Path) -> ExperimentConfig:
    """Resolved configuration stored at the top of a run manifest."""
    text = Path(path).read_text().split("# runs", 1)[0]
    return config_from_pairs(parse_config_text(text))


def parse_config_text(text: str) -> list[tuple[str, str]]:
    pairs = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value, got {line!r}")
        key, value = line.split("=", 1)
        pairs.append((key.strip(), value.strip()))
    return pairs
