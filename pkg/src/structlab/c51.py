"""Tabular C51 agent.

One categorical distribution per (state, action), stored as a dense
``(n_states, n_actions, n_atoms)`` array indexed by row-major state index.
Learning moves each distribution a fraction ``eta`` of the way toward its
projected distributional Bellman target, which keeps every entry on the
probability simplex.
"""

from __future__ import annotations

import numpy as np

from . import distribution as dist
from .distribution import Support
from .gridworld import ACTIONS, N_ACTIONS, Action, GridSpec, State, Transition


class QTable:
    def __init__(self, spec: GridSpec, sup: Support, gamma: float = 1.0):
        if not 0.0 <= gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
        self.spec = spec
        self.sup = sup
        self.gamma = float(gamma)
        self.probs = np.tile(sup.uniform(), (spec.n_states, N_ACTIONS, 1))

    def copy(self) -> QTable:
        other = QTable.__new__(QTable)
        other.spec, other.sup, other.gamma = self.spec, self.sup, self.gamma
        other.probs = self.probs.copy()
        return other

    def _idx(self, s: State) -> int:
        if not self.spec.contains(s):
            raise KeyError(f"state {tuple(s)} not in table")
        return self.spec.index(s)

    # -- read side -------------------------------------------------------

    def dist(self, s: State, a: Action) -> np.ndarray:
        return self.probs[self._idx(s), Action(a)]

    def q_value(self, s: State, a: Action) -> float:
        return float(self.probs[self._idx(s), Action(a)] @ self.sup.atoms)

    def q_values(self, s: State) -> np.ndarray:
        return self.probs[self._idx(s)] @ self.sup.atoms

    def all_q(self) -> np.ndarray:
        """``(n_states, n_actions)`` expected returns."""
        return self.probs @ self.sup.atoms

    def greedy_action(self, s: State) -> Action:
        # np.argmax returns the first maximiser, i.e. the Action declaration order
        return ACTIONS[int(np.argmax(self.q_values(s)))]

    def greedy_actions(self) -> np.ndarray:
        return np.argmax(self.all_q(), axis=1)

    def state_values(self) -> np.ndarray:
        return self.all_q().max(axis=1)

    def epsilon_greedy(self, s: State, epsilon: float, rng: np.random.Generator) -> Action:
        if not 0.0 <= epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
        if epsilon > 0.0 and rng.random() < epsilon:
            return ACTIONS[int(rng.integers(N_ACTIONS))]
        return self.greedy_action(s)

    def act(self, i: int, epsilon: float, rng: np.random.Generator) -> int:
        """``epsilon_greedy`` on a row-major state index; same random draws."""
        if epsilon > 0.0 and rng.random() < epsilon:
            return int(rng.integers(N_ACTIONS))
        return int(np.argmax(self.probs[i] @ self.sup.atoms))

    # -- learning --------------------------------------------------------

    def targets(
        self, s2: np.ndarray, r: np.ndarray, terminal: np.ndarray
    ) -> np.ndarray:
        """Projected Bellman targets for a batch, bootstrapping from the greedy successor action."""
        succ = self.probs[s2]
        a2 = np.argmax(succ @ self.sup.atoms, axis=1)
        nxt = succ[np.arange(len(s2)), a2]
        atoms, probs = dist.bellman_target(nxt, r, self.gamma, terminal, self.sup)
        return dist.project(atoms, probs, self.sup)

    def update_batch(
        self,
        s: np.ndarray,
        a: np.ndarray,
        r: np.ndarray,
        s2: np.ndarray,
        terminal: np.ndarray,
        eta: float,
    ) -> None:
        """Apply one mixture step per transition.

        Targets are computed from the table as it stands before the batch;
        repeated (s, a) pairs within a batch are then mixed in sequence.
        """
        if not 0.0 <= eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {eta}")
        if eta == 0.0 or len(s) == 0:
            return
        tgt = self.targets(s2, r, terminal)
        flat = s * N_ACTIONS + a
        if len(np.unique(flat)) == len(flat):
            self.probs[s, a] = (1.0 - eta) * self.probs[s, a] + eta * tgt
        else:
            for i in range(len(s)):
                self.probs[s[i], a[i]] = (1.0 - eta) * self.probs[s[i], a[i]] + eta * tgt[i]

    def update(self, t: Transition, eta: float) -> np.ndarray:
        """Single-transition update; returns the new distribution for ``(t.state, t.action)``."""
        if not 0.0 < eta <= 1.0:
            raise ValueError(f"eta must lie in (0, 1], got {eta}")
        i = self._idx(t.state)
        self.update_batch(
            np.array([i]),
            np.array([int(t.action)]),
            np.array([float(t.reward)]),
            np.array([self._idx(t.next_state)]),
            np.array([bool(t.terminal)]),
            eta,
        )
        return self.probs[i, int(t.action)]

    def sweep(self, transitions: list[Transition], eta: float = 1.0) -> None:
        """Synchronous update: every target is computed from a frozen copy first."""
        if not transitions:
            return
        idx = self.spec.index
        s = np.array([idx(t.state) for t in transitions])
        a = np.array([int(t.action) for t in transitions])
        r = np.array([t.reward for t in transitions], dtype=np.float64)
        s2 = np.array([idx(t.next_state) for t in transitions])
        term = np.array([t.terminal for t in transitions])
        tgt = self.targets(s2, r, term)
        self.probs[s, a] = (1.0 - eta) * self.probs[s, a] + eta * tgt
