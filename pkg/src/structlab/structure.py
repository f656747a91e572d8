"""Structural distance to a seed set and the two directional scores built on it."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .gridworld import ACTIONS, GridSpec, State, Transition, all_states, step

UNREACHED = -1


@dataclass
class TransitionGraph:
    """Directed edges observed in experience, plus every state seen at either end."""

    edges: set[tuple[State, State]] = field(default_factory=set)
    visited: set[State] = field(default_factory=set)

    def add(self, s: State, s2: State) -> None:
        s, s2 = State(*s), State(*s2)
        self.edges.add((s, s2))
        self.visited.add(s)
        self.visited.add(s2)

    @classmethod
    def from_transitions(cls, transitions: Iterable[Transition]) -> TransitionGraph:
        g = cls()
        for t in transitions:
            g.add(t.state, t.next_state)
        return g

    @classmethod
    def complete(cls, spec: GridSpec) -> TransitionGraph:
        """Every transition the environment can produce (model-based upper bound)."""
        g = cls()
        for s in all_states(spec):
            if s == spec.goal:
                g.visited.add(s)
                continue
            for a in ACTIONS:
                g.add(s, step(spec, s, a).next_state)
        return g


@dataclass(frozen=True)
class DistanceField:
    spec: GridSpec
    d: np.ndarray  # row-major, UNREACHED where no path to a seed was observed

    def __getitem__(self, s: State) -> int:
        return int(self.d[self.spec.index(s)])

    def grid(self) -> np.ndarray:
        return self.d.reshape(self.spec.height, self.spec.width)

    @classmethod
    def unreached(cls, spec: GridSpec) -> DistanceField:
        return cls(spec, np.full(spec.n_states, UNREACHED, dtype=np.int64))


def bfs_distance(spec: GridSpec, graph: TransitionGraph, seeds: Iterable[State]) -> DistanceField:
    """Steps from each state to the nearest seed along observed transitions.

    Runs a multi-source BFS from the seeds over reversed edges, so ``d(s)``
    counts moves the agent has actually seen itself make toward the seeds.
    """
    seeds = [State(*s) for s in seeds]
    if not seeds:
        raise ValueError("seed set is empty")
    preds: dict[State, list[State]] = {}
    for s, s2 in graph.edges:
        preds.setdefault(s2, []).append(s)

    d = np.full(spec.n_states, UNREACHED, dtype=np.int64)
    queue: deque[State] = deque()
    for s in seeds:
        if d[spec.index(s)] != 0:
            d[spec.index(s)] = 0
            queue.append(s)
    while queue:
        cur = queue.popleft()
        nd = d[spec.index(cur)] + 1
        # sorted for a reproducible visiting order; distances do not depend on it
        for p in sorted(preds.get(cur, ())):
            i = spec.index(p)
            if d[i] == UNREACHED:
                d[i] = nd
                queue.append(p)
    return DistanceField(spec, d)


def direction_score(d_s: int, d_s2: int, lam: float) -> float:
    """``exp(lam * (d_s - d_s2))``; neutral (1.0) if either side is unreached."""
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if d_s == UNREACHED or d_s2 == UNREACHED:
        return 1.0
    return math.exp(lam * (d_s - d_s2))


def replay_score(d_s: int, d_s2: int, alpha: float) -> float:
    """``tanh(alpha * (d_s - d_s2))``; neutral (0.0) if either side is unreached."""
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if d_s == UNREACHED or d_s2 == UNREACHED:
        return 0.0
    return math.tanh(alpha * (d_s - d_s2))


def replay_scores(d_s: np.ndarray, d_s2: np.ndarray, alpha: float) -> np.ndarray:
    """Vectorised ``replay_score``."""
    d_s = np.asarray(d_s)
    d_s2 = np.asarray(d_s2)
    known = (d_s != UNREACHED) & (d_s2 != UNREACHED)
    return np.where(known, np.tanh(alpha * (d_s - d_s2)), 0.0)
