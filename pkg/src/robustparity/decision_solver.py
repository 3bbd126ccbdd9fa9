"""One-player solving: multi-discounted and parity MDPs.

Parity MDPs are solved through maximal end components: a component is
winning when it contains a sub-end-component whose least priority is even,
and the value is the optimal probability of reaching the union of winning
components.  Player-2 MDPs are handled by duality (shift priorities by one
and swap roles).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from .chain_solver import (
    can_reach,
    discounted_values,
    parity_values,
    reach_probabilities,
)
from .game_core import (
    SUPPORT_EPS,
    DiscountSpec,
    MemorylessStrategy,
    Objective,
    ParityObjective,
    Structure,
    StructureError,
    StructureKind,
    as_game,
    classify,
    strategy_from_choices,
    turn_view,
)

ENUM_BUDGET = 10**6
IMPROVE_EPS = 1e-12


class EnumerationBudgetExceeded(ValueError):
    pass


@dataclass
class SolveResult:
    values: np.ndarray
    strategy: MemorylessStrategy
    iterations: int = 0
    residual: float = 0.0
    meta: dict = field(default_factory=dict)

    def as_dict(self, states: Sequence[str]) -> dict[str, float]:
        return {s: float(v) for s, v in zip(states, self.values)}


@dataclass(frozen=True)
class MaximalEndComponent:
    states: tuple[str, ...]
    actions: dict[str, tuple[str, ...]]


@dataclass
class _MDP:
    """Dense one-player view: ``rows[s][k]`` is the distribution of action ``k``."""

    controller: int
    moves: list[list[str]]
    rows: list[list[np.ndarray]]

    @property
    def n(self) -> int:
        return len(self.rows)

    def supports(self) -> list[list[np.ndarray]]:
        return [[np.flatnonzero(r > SUPPORT_EPS) for r in rs] for rs in self.rows]

    def chain(self, choice: Sequence[int]) -> np.ndarray:
        return np.array([self.rows[s][k] for s, k in enumerate(choice)])


def mdp_view(M: Structure) -> _MDP:
    G = as_game(M)
    kind = classify(G)
    if kind is StructureKind.MDP_PLAYER2:
        controller = 2
    elif kind in (StructureKind.MDP_PLAYER1, StructureKind.MARKOV_CHAIN):
        controller = 1
    else:
        raise StructureError(f"expected an MDP, got {kind.value}")
    view = turn_view(G)
    return _MDP(controller, [v.moves for v in view], [v.rows for v in view])


def _strategy(M: Structure, mdp: _MDP, choice: Sequence[int]) -> MemorylessStrategy:
    return strategy_from_choices(M, mdp.controller, choice)


# --- multi-discounted -------------------------------------------------------


def bellman_discounted(mdp: _MDP, lam: np.ndarray, r: np.ndarray, v: np.ndarray, maximize: bool = True):
    """One application of the optimal Bellman operator; returns values and greedy choices."""
    out = np.empty(mdp.n)
    choice = []
    for s in range(mdp.n):
        q = np.array([(1.0 - lam[s]) * r[s] + lam[s] * (row @ v) for row in mdp.rows[s]])
        best = q.max() if maximize else q.min()
        k = int(np.flatnonzero(np.abs(q - best) <= IMPROVE_EPS)[0])
        out[s] = best
        choice.append(k)
    return out, choice


def bellman_operator(M: Structure, spec: DiscountSpec, v: np.ndarray) -> np.ndarray:
    mdp = mdp_view(M)
    lam, r = spec.vectors(as_game(M).states)
    return bellman_discounted(mdp, lam, r, np.asarray(v, float), mdp.controller == 1)[0]


def multidiscounted_value_mdp(M: Structure, spec: DiscountSpec, tol: float = 1e-9) -> SolveResult:
    """Value iteration with a certified stopping rule.

    Iteration stops once the sup-norm step is at most
    ``tol * (1 - lam_max) / (2 lam_max)``, which bounds the distance to the
    fixed point, and that of the greedy strategy, by ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    G = as_game(M)
    mdp = mdp_view(G)
    lam, r = spec.vectors(G.states)
    lmax = float(lam.max())
    threshold = tol * (1.0 - lmax) / (2.0 * lmax)
    v = np.zeros(mdp.n)
    it = 0
    while True:
        it += 1
        nv, choice = bellman_discounted(mdp, lam, r, v, mdp.controller == 1)
        step = float(np.max(np.abs(nv - v)))
        v = nv
        if step <= threshold:
            break
    return SolveResult(v, _strategy(G, mdp, choice), iterations=it, residual=step, meta={"tol": tol})


# --- end components ---------------------------------------------------------


def _mec_indices(mdp: _MDP, alive: np.ndarray, allowed: list[list[int]]) -> list[tuple[list[int], dict[int, list[int]]]]:
    """Maximal end components of the sub-MDP given by ``alive`` and ``allowed``."""
    supp = mdp.supports()
    alive = alive.copy()
    allowed = [list(a) if alive[s] else [] for s, a in enumerate(allowed)]
    n = mdp.n
    while True:
        changed = False
        for s in range(n):
            if alive[s]:
                keep = [k for k in allowed[s] if alive[supp[s][k]].all()]
                if len(keep) != len(allowed[s]):
                    allowed[s], changed = keep, True
                if not keep:
                    alive[s], changed = False, True
        adj = np.zeros((n, n), dtype=np.int8)
        for s in range(n):
            for k in allowed[s]:
                adj[s, supp[s][k]] = 1
        _, labels = connected_components(adj, directed=True, connection="strong")
        for s in range(n):
            if alive[s]:
                keep = [k for k in allowed[s] if (labels[supp[s][k]] == labels[s]).all()]
                if len(keep) != len(allowed[s]):
                    allowed[s], changed = keep, True
        if not changed:
            break
    comps: dict[int, list[int]] = {}
    for s in range(n):
        if alive[s]:
            comps.setdefault(int(labels[s]), []).append(s)
    out = [(members, {s: allowed[s] for s in members}) for members in comps.values()]
    out.sort(key=lambda c: c[0])
    return out


def mec_decomposition(M: Structure) -> list[MaximalEndComponent]:
    G = as_game(M)
    mdp = mdp_view(G)
    mecs = _mec_indices(mdp, np.ones(mdp.n, dtype=bool), [list(range(len(r))) for r in mdp.rows])
    return [
        MaximalEndComponent(
            tuple(G.states[s] for s in members),
            {G.states[s]: tuple(mdp.moves[s][k] for k in acts[s]) for s in members},
        )
        for members, acts in mecs
    ]


def _winning_subecs(mdp: _MDP, prio: np.ndarray, members: list[int], acts: dict[int, list[int]]):
    """Sub-end-components with even least priority, as (states, actions, targets)."""
    m = int(prio[members].min())
    if m % 2 == 0:
        return [(members, acts, [s for s in members if prio[s] == m])]
    alive = np.zeros(mdp.n, dtype=bool)
    alive[[s for s in members if prio[s] != m]] = True
    allowed = [acts.get(s, []) for s in range(mdp.n)]
    found = []
    for sub_members, sub_acts in _mec_indices(mdp, alive, allowed):
        found.extend(_winning_subecs(mdp, prio, sub_members, sub_acts))
    return found


def _attractor_choice(mdp: _MDP, members, acts, targets) -> dict[int, int]:
    """Inside a closed component: at each state, an allowed action moving one BFS layer closer."""
    supp = mdp.supports()
    layer = {s: 0 for s in targets}
    choice = {s: acts[s][0] for s in targets}
    frontier = set(targets)
    while len(layer) < len(members):
        new = {}
        for s in members:
            if s in layer:
                continue
            for k in acts[s]:
                if any(int(t) in frontier or int(t) in layer for t in supp[s][k]):
                    new[s] = k
                    break
        if not new:
            raise RuntimeError("end component is not strongly connected")
        for s, k in new.items():
            layer[s] = len(layer)
            choice[s] = k
        frontier = set(new)
    return choice


def _max_reach(mdp: _MDP, target: np.ndarray, maximize: bool = True, start: Sequence[int] | None = None):
    """Optimal reachability by strategy iteration with exact evaluation.

    Maximizing starts from a positive-reachability attractor strategy so
    every iterate is proper; minimizing starts from an avoiding strategy.
    Returns (values, choice) with choices meaningful outside ``target``.
    """
    n = mdp.n
    supp = mdp.supports()
    if start is not None:
        choice = list(start)
    elif maximize:
        choice = [0] * n
        inside = target.copy()
        while True:
            grew = False
            for s in range(n):
                if inside[s]:
                    continue
                for k, sp in enumerate(supp[s]):
                    if inside[sp].any():
                        choice[s], inside[s], grew = k, True, True
                        break
            if not grew:
                break
    else:
        # states that can be kept away from target forever get an avoiding action
        safe = ~target.copy()
        while True:
            shrink = False
            for s in range(n):
                if safe[s] and not any(safe[sp].all() for sp in supp[s]):
                    safe[s], shrink = False, True
            if not shrink:
                break
        choice = [0] * n
        for s in range(n):
            if safe[s]:
                choice[s] = next(k for k, sp in enumerate(supp[s]) if safe[sp].all())
    for it in range(10 * n * max(len(r) for r in mdp.rows) + 100):
        v = reach_probabilities(mdp.chain(choice), target)
        switched = False
        for s in range(n):
            if target[s]:
                continue
            q = np.array([row @ v for row in mdp.rows[s]])
            if maximize:
                best = q.max()
                if best > v[s] + IMPROVE_EPS and best > q[choice[s]] + IMPROVE_EPS:
                    choice[s] = int(np.flatnonzero(q >= best - IMPROVE_EPS)[0])
                    switched = True
            else:
                best = q.min()
                if best < v[s] - IMPROVE_EPS and best < q[choice[s]] - IMPROVE_EPS:
                    choice[s] = int(np.flatnonzero(q <= best + IMPROVE_EPS)[0])
                    switched = True
        if not switched:
            return v, choice
    raise RuntimeError("reachability strategy iteration did not terminate")


def _parity_max(mdp: _MDP, prio: np.ndarray):
    """Maximal parity probability for the controller; returns (values, choice, winning mask)."""
    n = mdp.n
    mecs = _mec_indices(mdp, np.ones(n, dtype=bool), [list(range(len(r))) for r in mdp.rows])
    win = np.zeros(n, dtype=bool)
    inner: dict[int, int] = {}
    for members, acts in mecs:
        for sub_members, sub_acts, targets in _winning_subecs(mdp, prio, members, acts):
            win[sub_members] = True
            inner.update(_attractor_choice(mdp, sub_members, sub_acts, targets))
    _, choice = _max_reach(mdp, win, maximize=True)
    for s, k in inner.items():
        choice[s] = k
    values = parity_values(mdp.chain(choice), prio)
    return values, choice, win


def parity_value_mdp(M: Structure, p: ParityObjective) -> SolveResult:
    """Parity values and an optimal pure memoryless strategy for the controller.

    The returned values are the exact chain values of the extracted strategy.
    """
    G = as_game(M)
    mdp = mdp_view(G)
    prio = p.vector(G.states)
    if mdp.controller == 1:
        values, choice, win = _parity_max(mdp, prio)
    else:
        dual, choice, win = _parity_max(mdp, prio + 1)
        values = 1.0 - dual
    return SolveResult(
        values, _strategy(G, mdp, choice), meta={"winning_ec_states": [G.states[s] for s in np.flatnonzero(win)]}
    )


def solve_mdp(M: Structure, objective: Objective, tol: float = 1e-9) -> SolveResult:
    if isinstance(objective, ParityObjective):
        return parity_value_mdp(M, objective)
    return multidiscounted_value_mdp(M, objective, tol)


# --- brute force ------------------------------------------------------------


def chain_value(P: np.ndarray, objective: Objective, states: Sequence[str]) -> np.ndarray:
    if isinstance(objective, ParityObjective):
        return parity_values(P, objective.vector(states))
    lam, r = objective.vectors(states)
    return discounted_values(P, lam, r)


def strategy_enumeration_oracle(M: Structure, objective: Objective, budget: int = ENUM_BUDGET) -> np.ndarray:
    """Pointwise optimum over all pure memoryless strategies, each evaluated exactly."""
    G = as_game(M)
    mdp = mdp_view(G)
    sizes = [len(r) for r in mdp.rows]
    if math.prod(sizes) > budget:
        raise EnumerationBudgetExceeded(f"{math.prod(sizes)} strategies exceed the budget {budget}")
    best = None
    for choice in itertools.product(*(range(k) for k in sizes)):
        v = chain_value(mdp.chain(choice), objective, G.states)
        if best is None:
            best = v
        elif mdp.controller == 1:
            best = np.maximum(best, v)
        else:
            best = np.minimum(best, v)
    return best


def zero_value_states(mdp: _MDP, target: np.ndarray) -> np.ndarray:
    """States that cannot reach ``target`` under any action choice."""
    adj = np.zeros((mdp.n, mdp.n), dtype=bool)
    for s, sps in enumerate(mdp.supports()):
        for sp in sps:
            adj[s, sp] = True
    return ~can_reach(adj, np.flatnonzero(target))


__all__ = [
    "SolveResult",
    "MaximalEndComponent",
    "EnumerationBudgetExceeded",
    "multidiscounted_value_mdp",
    "mec_decomposition",
    "parity_value_mdp",
    "strategy_enumeration_oracle",
    "bellman_operator",
    "solve_mdp",
    "mdp_view",
]
