"""Named instance families and seeded random generators."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .game_core import (
    NO_MOVE,
    DiscountSpec,
    GameStructure,
    MarkovChain,
    ParityObjective,
    StructureKind,
)

MIN_PROB = 0.05
KINDS = tuple(k.value for k in StructureKind)


def example1_family(eps: float) -> tuple[MarkovChain, MarkovChain, ParityObjective]:
    """Two chains at absolute distance ``eps`` whose parity values differ by one."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    states = ("s0", "s1")
    G1 = MarkovChain(states, [[1.0, 0.0], [0.0, 1.0]])
    G2 = MarkovChain(states, [[1.0 - eps, eps], [0.0, 1.0]])
    return G1, G2, ParityObjective({"s0": 1, "s1": 2})


def example2_line(n: int, eps: float) -> tuple[MarkovChain, set[str]]:
    """Biased walk on ``s0..s_{2n}`` with absorbing ends; the target is ``s0``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0 <= eps < 0.5:
        raise ValueError("eps must lie in [0, 1/2)")
    m = 2 * n + 1
    P = np.zeros((m, m))
    P[0, 0] = P[-1, -1] = 1.0
    for i in range(1, m - 1):
        P[i, i - 1] = 0.5 + eps
        P[i, i + 1] = 0.5 - eps
    return MarkovChain(tuple(f"s{i}" for i in range(m)), P), {"s0"}


def example2_parity(n: int) -> ParityObjective:
    """Reaching ``s0`` as a parity condition: only the absorbing ``s0`` is even."""
    return ParityObjective({f"s{i}": (0 if i == 0 else 1) for i in range(2 * n + 1)})


def example2_exact_value(n: int, eps: float) -> float:
    """Probability of absorbing in ``s0`` from the middle state ``s_n``."""
    if n < 1 or not 0 <= eps < 0.5:
        raise ValueError("need n >= 1 and 0 <= eps < 1/2")
    ratio = (0.5 + eps) / (0.5 - eps)
    return 1.0 / (1.0 + ratio ** (-n))


def ratio_example_chains(eps: float) -> tuple[MarkovChain, MarkovChain, MarkovChain]:
    """Chains where ``t -> s`` (from either state) has probability ``k eps`` for k = 1, 2, 5."""
    if not 0 < eps < 1 / 7:
        raise ValueError("eps must lie in (0, 1/7)")
    out = []
    for k in (1, 2, 5):
        row = [k * eps, 1.0 - k * eps]
        out.append(MarkovChain(("s", "t"), [row, row]))
    return tuple(out)


def _distribution(rng: np.random.Generator, n: int, min_prob: float) -> dict[int, float]:
    kmax = max(1, min(3, n, int(1.0 / min_prob)))
    k = int(rng.integers(1, kmax + 1))
    supp = rng.choice(n, size=k, replace=False)
    w = min_prob + (1.0 - k * min_prob) * rng.dirichlet(np.ones(k))
    w /= w.sum()
    return {int(t): float(p) for t, p in zip(supp, w)}


def random_instance(
    kind: str | StructureKind,
    n: int,
    moves: int = 2,
    seed: int = 0,
    min_prob: float = MIN_PROB,
    objective: str | None = None,
    max_priority: int = 3,
):
    """Random structure of the requested kind; every positive probability is at least ``min_prob``.

    With ``objective`` set to ``"parity"`` or ``"multidiscounted"`` a matching
    random objective is returned alongside the structure.
    """
    kind = StructureKind(kind)
    if n < 1 or moves < 1:
        raise ValueError("need n >= 1 and moves >= 1")
    if not 0 < min_prob <= 0.5:
        raise ValueError("min_prob must lie in (0, 1/2]")
    if kind is not StructureKind.MARKOV_CHAIN and moves < 2:
        raise ValueError(f"{kind.value} needs at least two moves")
    if kind is StructureKind.TURN_BASED and n < 2:
        raise ValueError("turn-based instances need at least two states")
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    S = tuple(f"s{i}" for i in range(n))
    names = tuple(f"m{j}" for j in range(moves))
    g1, g2 = {}, {}
    for i, s in enumerate(S):
        k1 = k2 = 1
        if kind is StructureKind.MDP_PLAYER1:
            k1 = moves if i == 0 else int(rng.integers(1, moves + 1))
        elif kind is StructureKind.MDP_PLAYER2:
            k2 = moves if i == 0 else int(rng.integers(1, moves + 1))
        elif kind is StructureKind.TURN_BASED:
            owner = 1 if i == 0 else 2 if i == 1 else int(rng.integers(1, 3))
            k = moves if i < 2 else int(rng.integers(1, moves + 1))
            k1, k2 = (k, 1) if owner == 1 else (1, k)
        elif kind is StructureKind.CONCURRENT:
            k1 = moves if i == 0 else int(rng.integers(1, moves + 1))
            k2 = moves if i == 0 else int(rng.integers(1, moves + 1))
        g1[s] = names[:k1] if k1 > 1 else (NO_MOVE,)
        g2[s] = names[:k2] if k2 > 1 else (NO_MOVE,)
    delta = {}
    for s in S:
        for a in g1[s]:
            for b in g2[s]:
                delta[(s, a, b)] = {S[t]: p for t, p in sorted(_distribution(rng, n, min_prob).items())}
    used = names + (NO_MOVE,) if kind is not StructureKind.MARKOV_CHAIN else (NO_MOVE,)
    G = GameStructure(S, used, g1, g2, delta)
    if objective is None:
        return G
    if objective == "parity":
        return G, ParityObjective({s: int(rng.integers(0, max_priority + 1)) for s in S})
    if objective == "multidiscounted":
        return G, DiscountSpec(
            {s: float(rng.uniform(0.1, 0.9)) for s in S}, {s: float(rng.uniform(0.0, 1.0)) for s in S}
        )
    raise ValueError(f"unknown objective {objective!r}")


@dataclass(frozen=True)
class InstanceRecipe:
    family: str
    params: dict = field(default_factory=dict)

    def build(self) -> dict:
        """Materialize as ``{name: structure}`` plus an optional ``"objective"`` entry."""
        p = self.params
        if self.family == "example1":
            G1, G2, obj = example1_family(float(p.get("eps", 0.1)))
            return {"G1": G1, "G2": G2, "objective": obj}
        if self.family == "example2":
            n = int(p.get("n", 5))
            M, _ = example2_line(n, float(p.get("eps", 0.0)))
            return {"G": M, "objective": example2_parity(n)}
        if self.family == "ratio":
            G1, G2, G5 = ratio_example_chains(float(p.get("eps", 0.05)))
            return {"G1": G1, "G2": G2, "G5": G5}
        if self.family == "random":
            G, obj = random_instance(
                p.get("kind", "markov-chain"),
                int(p.get("n", 4)),
                int(p.get("moves", 2)),
                int(p.get("seed", 0)),
                float(p.get("min_prob", MIN_PROB)),
                objective=p.get("objective", "parity"),
            )
            return {"G": G, "objective": obj}
        raise ValueError(f"unknown family {self.family!r}")


FAMILIES = ("example1", "example2", "ratio", "random")
