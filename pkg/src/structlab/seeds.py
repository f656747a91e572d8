"""Seed-set selection from a short exploration phase.

Three independent selectors plus an ordered fallback. Every selector raises
``SeedSelectionError`` instead of returning a degenerate set, so a data-starved
exploration phase is always visible to the caller.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .c51 import QTable
from .dynamics import NEVER, TStarField
from .gridworld import State, Transition


class SeedSelectionError(RuntimeError):
    pass


@dataclass(frozen=True)
class SeedSet:
    states: tuple[State, ...]
    strategy: str
    k: int

    def __post_init__(self) -> None:
        if not self.states:
            raise ValueError("seed set must be non-empty")


def seeds_from_tstar(
    tstar: TStarField, stability: np.ndarray, k: int, max_changes: int = 1
) -> SeedSet:
    """The ``k`` earliest-activated states among those with a stable greedy action.

    If fewer than ``k`` states pass the stability filter, the allowed number
    of greedy-action changes is raised one step at a time.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    spec = tstar.spec
    stability = np.asarray(stability)
    finite = np.flatnonzero(tstar.t != NEVER)
    if finite.size == 0:
        raise SeedSelectionError(
            "no state showed a positive sigma jump; lengthen the exploration phase"
        )
    # stable sort on t* keeps row-major order among ties
    ranked = finite[np.argsort(tstar.t[finite], kind="stable")]
    limit = max_changes
    top = int(stability[ranked].max())
    while True:
        chosen = ranked[stability[ranked] <= limit]
        if chosen.size >= k or limit >= top:
            break
        limit += 1
    return SeedSet(tuple(spec.state_at(int(i)) for i in chosen[:k]), "tstar", k)


def seeds_from_reward(transitions: Iterable[Transition], k: int) -> SeedSet:
    """Origins of observed terminal transitions, most frequent first."""
    if k < 1:
        raise ValueError("k must be >= 1")
    counts = Counter(State(*t.state) for t in transitions if t.terminal)
    if not counts:
        raise SeedSelectionError("goal never reached during exploration")
    ranked = sorted(counts, key=lambda s: (-counts[s], s.y, s.x))
    return SeedSet(tuple(ranked[:k]), "reward", k)


def bellman_improvement(
    table: QTable, transitions: Iterable[Transition]
) -> dict[tuple[State, int], float]:
    """``r + gamma * V(s') - V(s)`` per observed (state, action); ``V(goal) = 0``."""
    v = table.state_values()
    idx = table.spec.index
    delta: dict[tuple[State, int], float] = {}
    for t in transitions:
        v_next = 0.0 if t.terminal else v[idx(t.next_state)]
        delta[(State(*t.state), int(t.action))] = float(
            t.reward + table.gamma * v_next - v[idx(t.state)]
        )
    return delta


def seeds_from_bellman(
    table: QTable, transitions: Iterable[Transition], k: int, tol: float = 1e-6
) -> SeedSet:
    """Top-``k`` states by their best positive Bellman improvement."""
    if k < 1:
        raise ValueError("k must be >= 1")
    score: dict[State, float] = {}
    for (s, _), d in bellman_improvement(table, transitions).items():
        score[s] = max(d, score.get(s, -np.inf))
    positive = [s for s, v in score.items() if v > tol]
    if not positive:
        raise SeedSelectionError("no state shows a positive Bellman improvement")
    positive.sort(key=lambda s: (-score[s], s.y, s.x))
    return SeedSet(tuple(positive[:k]), "bellman", k)


def seeds_hybrid(candidates: Sequence[tuple[str, Callable[[], SeedSet]]]) -> SeedSet:
    """First selector in ``candidates`` that succeeds; the set keeps its own tag."""
    errors = []
    for name, select in candidates:
        try:
            return select()
        except SeedSelectionError as exc:
            errors.append(f"{name}: {exc}")
    raise SeedSelectionError(
        "all seed strategies failed ("
        + "; ".join(errors)
        + "); increase exploration_episodes or explore_epsilon"
    )
