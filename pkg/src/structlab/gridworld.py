"""Deterministic 4-connected gridworld with a shortest-path oracle.

Coordinates are ``(x, y)`` with ``x`` the column and ``y`` the row; ``y = 0``
is the top row, so the default goal ``(0, 0)`` is the upper-left corner.
Moving into a wall leaves the agent in place.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache
from typing import NamedTuple

import numpy as np


class State(NamedTuple):
    x: int
    y: int


class Action(IntEnum):
    # Declaration order is the tie-break order for greedy selection.
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3


ACTIONS: tuple[Action, ...] = tuple(Action)
N_ACTIONS = len(ACTIONS)

_MOVES = {
    Action.UP: (0, -1),
    Action.DOWN: (0, 1),
    Action.LEFT: (-1, 0),
    Action.RIGHT: (1, 0),
}


class Transition(NamedTuple):
    state: State
    action: Action
    reward: float
    next_state: State
    terminal: bool


@dataclass(frozen=True)
class GridSpec:
    width: int = 10
    height: int = 10
    goal: State = State(0, 0)
    step_reward: float = -1.0
    max_steps: int = 100

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.width}x{self.height}")
        gx, gy = self.goal
        if not (0 <= gx < self.width and 0 <= gy < self.height):
            raise ValueError(f"goal {tuple(self.goal)} outside {self.width}x{self.height} grid")
        if self.max_steps < self.width + self.height:
            raise ValueError(
                f"max_steps={self.max_steps} must be >= width + height = {self.width + self.height}"
            )
        object.__setattr__(self, "goal", State(int(gx), int(gy)))

    @property
    def n_states(self) -> int:
        return self.width * self.height

    def contains(self, s: State) -> bool:
        return 0 <= s[0] < self.width and 0 <= s[1] < self.height

    def index(self, s: State) -> int:
        """Row-major index of a state."""
        return s[1] * self.width + s[0]

    def state_at(self, idx: int) -> State:
        return State(idx % self.width, idx // self.width)


def _move(spec: GridSpec, s: State, a: Action) -> State:
    dx, dy = _MOVES[Action(a)]
    x = min(max(s[0] + dx, 0), spec.width - 1)
    y = min(max(s[1] + dy, 0), spec.height - 1)
    return State(x, y)


def step(spec: GridSpec, s: State, a: Action) -> Transition:
    """Apply action ``a`` in state ``s``.

    Raises ``ValueError`` when called from the goal: episodes end there and a
    transition out of it would be a bookkeeping bug upstream.
    """
    s = State(*s)
    if not spec.contains(s):
        raise ValueError(f"state {tuple(s)} outside grid")
    if s == spec.goal:
        raise ValueError("cannot step from the terminal goal state")
    nxt = _move(spec, s, a)
    return Transition(s, Action(a), spec.step_reward, nxt, nxt == spec.goal)


def all_states(spec: GridSpec) -> list[State]:
    return [State(x, y) for y in range(spec.height) for x in range(spec.width)]


@lru_cache(maxsize=32)
def distance_grid(spec: GridSpec) -> np.ndarray:
    """Shortest step count to the goal for every state, row-major, via BFS."""
    dist = np.full(spec.n_states, -1, dtype=np.int64)
    dist[spec.index(spec.goal)] = 0
    queue = deque([spec.goal])
    while queue:
        cur = queue.popleft()
        for a in ACTIONS:
            # moves are reversible on an open grid, so forward neighbours are predecessors
            nb = _move(spec, cur, a)
            i = spec.index(nb)
            if dist[i] < 0:
                dist[i] = dist[spec.index(cur)] + 1
                queue.append(nb)
    dist.setflags(write=False)
    return dist


def true_distance(spec: GridSpec, s: State) -> int:
    return int(distance_grid(spec)[spec.index(s)])


def successor_table(spec: GridSpec) -> np.ndarray:
    """``(n_states, N_ACTIONS)`` array of next-state indices (goal row maps to itself)."""
    table = np.empty((spec.n_states, N_ACTIONS), dtype=np.int64)
    for i, s in enumerate(all_states(spec)):
        for a in ACTIONS:
            table[i, a] = spec.index(_move(spec, s, a)) if s != spec.goal else i
    return table
