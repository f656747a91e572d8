"""Structure-biased control: distance-seeking action sampling and replay."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gridworld import ACTIONS, N_ACTIONS, Action, GridSpec, State, Transition, step
from .structure import DistanceField, direction_score, replay_scores


@dataclass(frozen=True)
class StructPolicyParams:
    lam: float = 1.0
    alpha: float = 1.0
    epsilon: float = 0.1
    weight_floor: float = 0.05

    def __post_init__(self) -> None:
        if self.lam <= 0:
            raise ValueError("lambda must be positive")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if not 0.0 < self.weight_floor < 1.0:
            raise ValueError("weight_floor must lie in (0, 1)")


class ReplayBuffer:
    """FIFO transition store backed by flat arrays of state indices.

    ``weights`` caches one replay weight per stored entry for the structured
    sampler; it is filled lazily from the distance field in force.
    """

    def __init__(self, spec: GridSpec, capacity: int = 50_000):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.spec = spec
        self.capacity = capacity
        self.s = np.zeros(capacity, dtype=np.int64)
        self.a = np.zeros(capacity, dtype=np.int64)
        self.r = np.zeros(capacity, dtype=np.float64)
        self.s2 = np.zeros(capacity, dtype=np.int64)
        self.terminal = np.zeros(capacity, dtype=bool)
        self._next = 0
        self._size = 0
        self._field: DistanceField | None = None
        self._alpha = 0.0
        self._floor = 0.0
        self._weights = np.zeros(capacity)
        self._weighted = np.zeros(capacity, dtype=bool)
        self._cumsum: np.ndarray | None = None

    def __len__(self) -> int:
        return self._size

    def push(self, t: Transition) -> None:
        idx = self.spec.index
        self.push_index(idx(t.state), int(t.action), t.reward, idx(t.next_state), t.terminal)

    def push_index(self, s: int, a: int, r: float, s2: int, terminal: bool) -> None:
        i = self._next
        self.s[i] = s
        self.a[i] = a
        self.r[i] = r
        self.s2[i] = s2
        self.terminal[i] = terminal
        self._weighted[i] = False
        self._cumsum = None
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def _order(self) -> np.ndarray:
        """Slot indices from oldest to newest."""
        if self._size < self.capacity:
            return np.arange(self._size)
        return (np.arange(self.capacity) + self._next) % self.capacity

    def _transition(self, i: int) -> Transition:
        return Transition(
            self.spec.state_at(int(self.s[i])),
            ACTIONS[int(self.a[i])],
            float(self.r[i]),
            self.spec.state_at(int(self.s2[i])),
            bool(self.terminal[i]),
        )

    @property
    def entries(self) -> list[Transition]:
        return [self._transition(i) for i in self._order()]

    def arrays(self, slots: np.ndarray) -> tuple[np.ndarray, ...]:
        return self.s[slots], self.a[slots], self.r[slots], self.s2[slots], self.terminal[slots]

    # -- sampling ----------------------------------------------------------

    def sample_uniform(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        if self._size == 0:
            raise ValueError("cannot sample from an empty buffer")
        return rng.integers(self._size, size=batch_size)

    def set_field(self, field: DistanceField | None, alpha: float, weight_floor: float) -> None:
        self._field, self._alpha, self._floor = field, alpha, weight_floor
        self._weighted[:] = False
        self._cumsum = None

    def use_field(self, field: DistanceField, alpha: float, weight_floor: float) -> None:
        """Attach ``field`` unless it is already the one in force."""
        if field is not self._field or alpha != self._alpha or weight_floor != self._floor:
            self.set_field(field, alpha, weight_floor)

    def entry_weights(self) -> np.ndarray:
        """Replay weight of every stored slot (slot order, not age order)."""
        if self._field is None:
            raise ValueError("no distance field attached")
        n = self._size
        todo = np.flatnonzero(~self._weighted[:n])
        if todo.size:
            d = self._field.d
            score = replay_scores(d[self.s[todo]], d[self.s2[todo]], self._alpha)
            self._weights[todo] = self._floor + (1.0 - self._floor) * (1.0 + score) / 2.0
            self._weighted[todo] = True
        return self._weights[:n]

    def sample_weighted(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        if self._size == 0:
            raise ValueError("cannot sample from an empty buffer")
        if self._cumsum is None:
            self._cumsum = np.cumsum(self.entry_weights())
        u = rng.random(batch_size) * self._cumsum[-1]
        return np.minimum(np.searchsorted(self._cumsum, u, side="right"), self._size - 1)


def push(buffer: ReplayBuffer, t: Transition) -> ReplayBuffer:
    buffer.push(t)
    return buffer


def action_probabilities(
    spec: GridSpec, s: State, field: DistanceField, params: StructPolicyParams
) -> np.ndarray:
    """Exploit-branch distribution: proportional to the direction score of each successor."""
    d_s = field[s]
    scores = np.array(
        [direction_score(d_s, field[step(spec, s, a).next_state], params.lam) for a in ACTIONS]
    )
    return scores / scores.sum()


def select_action(
    spec: GridSpec,
    s: State,
    field: DistanceField,
    params: StructPolicyParams,
    rng: np.random.Generator,
) -> Action:
    """Uniform with probability epsilon, otherwise sampled by one-step lookahead on ``field``."""
    if State(*s) == spec.goal:
        raise ValueError("no action to select at the goal")
    if params.epsilon > 0.0 and rng.random() < params.epsilon:
        return ACTIONS[int(rng.integers(N_ACTIONS))]
    p = action_probabilities(spec, s, field, params)
    return ACTIONS[int(rng.choice(N_ACTIONS, p=p))]


def sample_batch(
    buffer: ReplayBuffer,
    field: DistanceField,
    params: StructPolicyParams,
    batch_size: int,
    rng: np.random.Generator,
) -> list[Transition]:
    """Draw ``batch_size`` transitions with replacement, weighted by directional progress."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    buffer.use_field(field, params.alpha, params.weight_floor)
    return [buffer._transition(int(i)) for i in buffer.sample_weighted(batch_size, rng)]

