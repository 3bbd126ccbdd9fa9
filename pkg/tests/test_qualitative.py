import numpy as np
import pytest

from conftest import random_turn_based
from robustparity.game_core import ParityObjective, turn_view
from robustparity.game_solver import parity_value_turnbased
from robustparity.qualitative import Arena, almost_sure_p1, positive_attractor, positive_region_p2


def arena_of(G, p):
    view = turn_view(G)
    prio = p.vector(G.states)
    arena = Arena([], [], [])
    for v in view:
        arena.add(v.owner, 0)
    for s, v in enumerate(view):
        arena.prio[s] = int(prio[s])
    neutral = int(prio.max()) + 2 + int(prio.max()) % 2
    for s, v in enumerate(view):
        for row in v.rows:
            a = arena.add(0, neutral, [int(t) for t in np.flatnonzero(row > 0)])
            arena.succ[s].append(a)
    return arena


def test_attractor_layers():
    # 0 -> 1 -> 2 (target); 3 belongs to the opponent and may escape to 4
    arena = Arena([1, 1, 1, 2, 1], [1] * 5, [[1], [2], [2], [2, 4], [4]])
    attr, choice = positive_attractor(arena, frozenset(range(5)), {2}, 1)
    assert attr == {0, 1, 2}
    assert choice == {0: 1, 1: 2}


def test_chance_vertex_gives_positive_probability():
    # z (player 2, priority 0) can loop or enter a fair lottery between win and lose sinks
    arena = Arena([], [], [])
    z = arena.add(2, 0)
    win = arena.add(0, 0, [])
    lose = arena.add(0, 1, [])
    arena.succ[win].append(win)
    arena.succ[lose].append(lose)
    lot = arena.add(0, 3, [win, lose])
    arena.succ[z] += [z, lot]
    assert positive_region_p2(arena) == {z, lose, lot}


@pytest.mark.parametrize("seed", range(80))
def test_almost_sure_region_equals_value_one(seed):
    rng = np.random.default_rng(seed)
    G = random_turn_based(rng, int(rng.integers(2, 6)), 2)
    p = ParityObjective({s: int(rng.integers(0, 5)) for s in G.states})
    values = parity_value_turnbased(G, p, method="enumeration").values
    arena = arena_of(G, p)
    win, sigma = almost_sure_p1(arena)
    states = set(range(G.n))
    assert win & states == {s for s in states if values[s] > 1 - 1e-9}
    for v, w in sigma.items():
        assert w in arena.succ[v] and w in win
