import numpy as np
import pytest

from robustparity.game_core import GameStructure, MarkovChain


def random_chain(rng, n, max_support=3, min_prob=0.0):
    P = np.zeros((n, n))
    for i in range(n):
        k = int(rng.integers(1, min(max_support, n) + 1))
        supp = rng.choice(n, size=k, replace=False)
        w = rng.random(k) + 0.1
        P[i, supp] = w / w.sum()
    return MarkovChain(tuple(f"s{i}" for i in range(n)), P)


def random_turn_based(rng, n, k):
    """Each state picks an owner; player 2 may get every state, so MDPs appear too."""
    S = [f"s{i}" for i in range(n)]
    moves = [f"m{j}" for j in range(k)]
    g1, g2, delta = {}, {}, {}
    for s in S:
        own = int(rng.integers(1, 3))
        acts = tuple(moves[: int(rng.integers(1, k + 1))])
        g1[s], g2[s] = (acts, ("_",)) if own == 1 else (("_",), acts)
        for a in acts:
            supp = rng.choice(n, size=int(rng.integers(1, 3)), replace=False)
            w = rng.random(len(supp)) + 0.1
            w /= w.sum()
            key = (s, a, "_") if own == 1 else (s, "_", a)
            delta[key] = {S[t]: float(x) for t, x in zip(supp, w)}
    return GameStructure(S, tuple(moves) + ("_",), g1, g2, delta)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
