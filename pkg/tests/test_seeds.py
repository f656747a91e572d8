import numpy as np
import pytest

from structlab.c51 import QTable
from structlab.distribution import Support
from structlab.dynamics import NEVER, TStarField
from structlab.gridworld import Action, GridSpec, State, step
from structlab.seeds import (
    SeedSelectionError,
    SeedSet,
    bellman_improvement,
    seeds_from_bellman,
    seeds_from_reward,
    seeds_from_tstar,
    seeds_hybrid,
)

SPEC = GridSpec()
SUP = Support()


def tfield(values):
    t = np.full(SPEC.n_states, NEVER)
    for s, v in values.items():
        t[SPEC.index(s)] = v
    return TStarField(SPEC, t)


def test_tstar_picks_earliest_stable():
    tstar = tfield({State(1, 0): 2, State(0, 1): 3, State(5, 5): 1, State(2, 2): 8})
    stability = np.zeros(SPEC.n_states, dtype=int)
    stability[SPEC.index(State(5, 5))] = 4
    out = seeds_from_tstar(tstar, stability, k=2)
    assert out.states == (State(1, 0), State(0, 1)) and out.strategy == "tstar"


def test_tstar_relaxes_stability_filter():
    tstar = tfield({State(1, 0): 2, State(5, 5): 1})
    stability = np.full(SPEC.n_states, 3)
    out = seeds_from_tstar(tstar, stability, k=2, max_changes=1)
    assert out.states == (State(5, 5), State(1, 0))


def test_tstar_ties_keep_row_major_order():
    tstar = tfield({State(3, 1): 4, State(2, 1): 4, State(9, 0): 4})
    out = seeds_from_tstar(tstar, np.zeros(SPEC.n_states, dtype=int), k=3)
    assert out.states == (State(9, 0), State(2, 1), State(3, 1))


def test_tstar_all_never_fails():
    with pytest.raises(SeedSelectionError):
        seeds_from_tstar(tfield({}), np.zeros(SPEC.n_states, dtype=int), k=3)


def test_reward_seeds_by_frequency():
    into_goal_right = step(SPEC, State(1, 0), Action.LEFT)
    into_goal_below = step(SPEC, State(0, 1), Action.UP)
    other = step(SPEC, State(5, 5), Action.UP)
    out = seeds_from_reward([other, into_goal_below, into_goal_right, into_goal_below], k=5)
    assert out.states == (State(0, 1), State(1, 0))
    with pytest.raises(SeedSelectionError):
        seeds_from_reward([other], k=2)


def test_bellman_seeds_near_goal():
    table = QTable(SPEC, SUP)
    trans = [step(SPEC, State(1, 0), Action.LEFT), step(SPEC, State(5, 5), Action.UP)]
    delta = bellman_improvement(table, trans)
    # fresh table: V = -50 everywhere, so a terminal step gains 49 and an inner step loses 1
    assert delta[(State(1, 0), int(Action.LEFT))] == pytest.approx(49.0)
    assert delta[(State(5, 5), int(Action.UP))] == pytest.approx(-1.0)
    assert seeds_from_bellman(table, trans, k=3).states == (State(1, 0),)
    with pytest.raises(SeedSelectionError):
        seeds_from_bellman(table, trans[1:], k=3)


def test_hybrid_order_and_failure():
    def fail():
        raise SeedSelectionError("nothing")

    a = SeedSet((State(1, 0),), "reward", 1)
    b = SeedSet((State(2, 0),), "bellman", 1)
    assert seeds_hybrid([("tstar", fail), ("reward", lambda: a), ("bellman", lambda: b)]) is a
    assert seeds_hybrid([("tstar", lambda: b), ("reward", lambda: a)]).strategy == "bellman"
    with pytest.raises(SeedSelectionError, match="exploration_episodes"):
        seeds_hybrid([("tstar", fail), ("reward", fail)])


def test_seed_set_non_empty_and_k_positive():
    with pytest.raises(ValueError):
        SeedSet((), "tstar", 1)
    with pytest.raises(ValueError):
        seeds_from_reward([], 0)
