"""Qualitative parity on explicit 2 1/2-player graphs.

Vertices belong to player 1, player 2 or chance (owner 0).  ``positive_region_p2``
returns the vertices from which player 2 wins the co-parity condition with
positive probability; its complement is player 1's almost-sure region, and
a memoryless almost-sure strategy for player 1 is assembled from the
attractors used along the recursion.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass
class Arena:
    owner: list[int]
    prio: list[int]
    succ: list[list[int]]

    @property
    def n(self) -> int:
        return len(self.owner)

    def add(self, owner: int, prio: int, succ: list[int] | None = None) -> int:
        self.owner.append(owner)
        self.prio.append(prio)
        self.succ.append(list(succ or []))
        return self.n - 1


def positive_attractor(arena: Arena, U: frozenset, target: set, player: int) -> tuple[set, dict[int, int]]:
    """Vertices of ``U`` from which ``player`` reaches ``target`` with positive probability.

    Returns the attractor and, for the player's own vertices outside
    ``target``, a successor that moves one layer closer.
    """
    attr = set(target) & U
    choice: dict[int, int] = {}
    changed = True
    while changed:
        changed = False
        for v in U:
            if v in attr:
                continue
            succ = [w for w in arena.succ[v] if w in U]
            own = arena.owner[v]
            if own == player or own == 0:
                hit = next((w for w in succ if w in attr), None)
                if hit is not None:
                    attr.add(v)
                    if own == player:
                        choice[v] = hit
                    changed = True
            elif succ and all(w in attr for w in succ):
                attr.add(v)
                changed = True
    return attr, choice


def _solve(arena: Arena, U: frozenset) -> tuple[set, dict[int, int]]:
    """(player-2 positive region, player-1 almost-sure strategy on the rest) within subgame ``U``."""
    if not U:
        return set(), {}
    d = min(arena.prio[v] for v in U)
    D = {v for v in U if arena.prio[v] == d}
    if d % 2 == 0:
        A, attr_choice = positive_attractor(arena, U, D, 1)
        P, sub_sigma = _solve(arena, U - A)
        if not P:
            sigma = dict(sub_sigma)
            sigma.update(attr_choice)
            for v in D:
                if arena.owner[v] == 1:
                    sigma[v] = next(w for w in arena.succ[v] if w in U)
            return set(), sigma
        B, _ = positive_attractor(arena, U, P, 2)
        rest, sigma = _solve(arena, U - B)
        return B | rest, sigma
    A, _ = positive_attractor(arena, U, D, 2)
    sub = U - A
    P, sub_sigma = _solve(arena, sub)
    W1 = set(sub) - P
    if not W1:
        return set(U), {}
    Y, attr_choice = positive_attractor(arena, U, W1, 1)
    H = U - Y
    Z, h_sigma = _solve(arena, H)
    if not Z:
        sigma = {v: w for v, w in sub_sigma.items() if v in W1}
        sigma.update({v: w for v, w in attr_choice.items() if v not in W1})
        sigma.update(h_sigma)
        return set(), sigma
    B, _ = positive_attractor(arena, U, Z, 2)
    rest, sigma = _solve(arena, U - B)
    return B | rest, sigma


def positive_region_p2(arena: Arena) -> set[int]:
    return _solve(arena, frozenset(range(arena.n)))[0]


def almost_sure_p1(arena: Arena) -> tuple[set[int], dict[int, int]]:
    """Player 1's almost-sure winning vertices and a memoryless strategy on them."""
    pos2, sigma = _solve(arena, frozenset(range(arena.n)))
    win = set(range(arena.n)) - pos2
    return win, {v: w for v, w in sigma.items() if v in win and arena.owner[v] == 1}
