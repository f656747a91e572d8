"""Learning-dynamics bookkeeping: per-state return spread over time.

A ``SigmaTrace`` holds one snapshot of the per-state return standard deviation
per completed episode. ``t_star`` locates, for each state, the snapshot
interval with the largest positive jump in that series: the moment new
information reached the state most strongly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from . import distribution as dist
from .c51 import QTable
from .gridworld import GridSpec, State
from .structure import UNREACHED, DistanceField, TransitionGraph

NEVER = -1
# Increments at or below this count as "no change" (float noise after smoothing).
_POS_TOL = 1e-9

SigmaReduction = Literal["greedy", "mean"]


def state_sigma(table: QTable, reduction: SigmaReduction = "greedy") -> np.ndarray:
    """Per-state return std, row-major.

    ``greedy`` uses the distribution of the greedy action; ``mean`` averages
    the std over all actions.
    """
    sd = dist.std(table.probs, table.sup)  # (n_states, n_actions)
    if reduction == "greedy":
        a = table.greedy_actions()
        return sd[np.arange(sd.shape[0]), a]
    if reduction == "mean":
        return sd.mean(axis=1)
    raise ValueError(f"unknown sigma reduction {reduction!r}")


@dataclass
class SigmaTrace:
    episodes: list[int] = field(default_factory=list)
    sigmas: list[np.ndarray] = field(default_factory=list)
    reduction: SigmaReduction = "greedy"

    def __len__(self) -> int:
        return len(self.episodes)

    def record(self, episode: int, table: QTable) -> None:
        if self.episodes and episode <= self.episodes[-1]:
            raise ValueError(f"episode {episode} not after last snapshot {self.episodes[-1]}")
        self.episodes.append(int(episode))
        self.sigmas.append(state_sigma(table, self.reduction))

    def record_sigma(self, episode: int, sigma: np.ndarray) -> None:
        if self.episodes and episode <= self.episodes[-1]:
            raise ValueError(f"episode {episode} not after last snapshot {self.episodes[-1]}")
        self.episodes.append(int(episode))
        self.sigmas.append(np.asarray(sigma, dtype=np.float64))

    def as_array(self) -> np.ndarray:
        """``(n_snapshots, n_states)``."""
        return np.vstack(self.sigmas)

    def truncated(self, n: int) -> SigmaTrace:
        return SigmaTrace(self.episodes[:n], self.sigmas[:n], self.reduction)


def smooth(series: np.ndarray, window: int) -> np.ndarray:
    """Centred moving average along axis 0; the window shrinks at the ends."""
    if window < 1:
        raise ValueError(f"smoothing window must be >= 1, got {window}")
    series = np.asarray(series, dtype=np.float64)
    if window == 1:
        return series.copy()
    lo = window // 2
    hi = window - lo - 1
    n = series.shape[0]
    csum = np.concatenate([np.zeros((1,) + series.shape[1:]), np.cumsum(series, axis=0)])
    idx = np.arange(n)
    start = np.maximum(idx - lo, 0)
    stop = np.minimum(idx + hi + 1, n)
    count = (stop - start).reshape((-1,) + (1,) * (series.ndim - 1))
    return (csum[stop] - csum[start]) / count


def t_star_series(series: np.ndarray, smoothing_window: int = 1) -> np.ndarray:
    """Index of the largest positive increment per column, or ``NEVER``.

    ``series`` has shape ``(T, ...)``. Increments within ``_POS_TOL`` of the
    peak count as ties, which resolve to the earliest index.
    """
    series = np.asarray(series, dtype=np.float64)
    if series.shape[0] < 2:
        raise ValueError("need at least 2 snapshots to locate an increment")
    inc = np.diff(smooth(series, smoothing_window), axis=0)
    peak = inc.max(axis=0)
    # rounding in the moving average can split exact ties
    best = np.argmax(inc >= peak - _POS_TOL, axis=0)
    return np.where(peak > _POS_TOL, best, NEVER)


@dataclass(frozen=True)
class TStarField:
    spec: GridSpec
    t: np.ndarray  # row-major episode index, NEVER if no positive jump

    def __getitem__(self, s: State) -> int:
        return int(self.t[self.spec.index(s)])

    @property
    def finite(self) -> np.ndarray:
        return self.t != NEVER

    def grid(self) -> np.ndarray:
        return self.t.reshape(self.spec.height, self.spec.width)


def t_star(trace: SigmaTrace, spec: GridSpec, smoothing_window: int = 3) -> TStarField:
    """Episode count at which each state's sigma jumped the most.

    A value ``t`` means the jump happened between the snapshots taken after
    ``episodes[t]`` and ``episodes[t + 1]``.
    """
    if len(trace) < 2:
        raise ValueError("need at least 2 snapshots to locate an increment")
    idx = t_star_series(trace.as_array(), smoothing_window)
    episodes = np.asarray(trace.episodes)
    t = np.where(idx == NEVER, NEVER, episodes[np.maximum(idx, 0)])
    return TStarField(spec, t.astype(np.int64))


@dataclass
class StabilityTrace:
    episodes: list[int] = field(default_factory=list)
    actions: list[np.ndarray] = field(default_factory=list)

    def record(self, episode: int, table: QTable) -> None:
        if self.episodes and episode <= self.episodes[-1]:
            raise ValueError(f"episode {episode} not after last entry {self.episodes[-1]}")
        self.episodes.append(int(episode))
        self.actions.append(table.greedy_actions())


def stability_counts(trace: StabilityTrace, window: int) -> np.ndarray:
    """Greedy-action changes per state between consecutive entries of the last ``window`` entries."""
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    if len(trace.actions) < window:
        raise ValueError(f"trace has {len(trace.actions)} entries, window is {window}")
    tail = np.vstack(trace.actions[-window:])
    return (tail[1:] != tail[:-1]).sum(axis=0)


def frontier_transitions(
    tstar: TStarField, d: DistanceField, tau: int, graph: TransitionGraph
) -> list[tuple[State, State]]:
    """Observed edges joining temporally aligned states that step down in ``d``."""
    out = []
    for s, s2 in sorted(graph.edges):
        ts, ts2 = tstar[s], tstar[s2]
        ds, ds2 = d[s], d[s2]
        if NEVER in (ts, ts2) or UNREACHED in (ds, ds2):
            continue
        if abs(ts - ts2) <= tau and ds2 < ds:
            out.append((s, s2))
    return out


SamplingStrategy = Literal["uniform", "sigma", "tstar"]


def sampling_weights(
    strategy: SamplingStrategy,
    sigma: np.ndarray,
    tstar: TStarField | np.ndarray,
    current_episode: int,
    tau_kernel: float = 5.0,
    floor: float = 1e-3,
) -> np.ndarray:
    """Normalised per-state sampling weights for the three visitation strategies.

    ``sigma`` weights are proportional to the return std plus ``floor``;
    ``tstar`` weights decay as ``exp(-|t*(s) - current_episode| / tau_kernel)``
    with never-activated states held at ``floor``.
    """
    if floor <= 0:
        raise ValueError("floor must be positive")
    sigma = np.asarray(sigma, dtype=np.float64)
    n = sigma.shape[0]
    if strategy == "uniform":
        w = np.ones(n)
    elif strategy == "sigma":
        w = np.maximum(sigma, 0.0) + floor
    elif strategy == "tstar":
        if tau_kernel <= 0:
            raise ValueError("tau_kernel must be positive")
        t = tstar.t if isinstance(tstar, TStarField) else np.asarray(tstar)
        kern = np.exp(-np.abs(t - current_episode) / tau_kernel)
        w = np.where(t == NEVER, floor, np.maximum(kern, floor))
    else:
        raise ValueError(f"unknown sampling strategy {strategy!r}")
    return w / w.sum()

