"""Game structures, Markov chains, strategies and the two structural distances.

A :class:`GameStructure` is the concurrent two-player form; turn-based games,
MDPs and Markov chains are the same object with singleton move sets in the
right places.  :class:`MarkovChain` is a dense convenience view used by the
chain solver.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Union

import numpy as np

SUM_TOL = 1e-9
SUPPORT_EPS = 1e-12
# Placeholder move for players without a choice (Markov chains, restrictions).
NO_MOVE = "_"


class StructureError(ValueError):
    """Raised when a structure fails validation before solving."""


class ShapeMismatch(ValueError):
    """The two structures do not share states, moves and move sets."""


class NotStructurallyEquivalent(ValueError):
    """Transition supports differ, so the ratio distance is infinite."""


class StructureKind(str, enum.Enum):
    CONCURRENT = "concurrent"
    TURN_BASED = "turn-based"
    MDP_PLAYER1 = "mdp-player1"
    MDP_PLAYER2 = "mdp-player2"
    MARKOV_CHAIN = "markov-chain"


@dataclass(frozen=True)
class Diagnostic:
    rule: str
    state: str | None
    message: str
    move: tuple[str, str] | None = None


@dataclass(frozen=True)
class GameStructure:
    """Finite concurrent stochastic game structure.

    ``delta`` maps ``(state, move1, move2)`` to a sparse distribution
    ``{target: probability}``.  Internal indices follow declaration order.
    """

    states: tuple[str, ...]
    moves: tuple[str, ...]
    gamma1: Mapping[str, tuple[str, ...]]
    gamma2: Mapping[str, tuple[str, ...]]
    delta: Mapping[tuple[str, str, str], Mapping[str, float]]

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "moves", tuple(self.moves))
        object.__setattr__(self, "gamma1", {s: tuple(m) for s, m in self.gamma1.items()})
        object.__setattr__(self, "gamma2", {s: tuple(m) for s, m in self.gamma2.items()})
        object.__setattr__(
            self,
            "delta",
            {tuple(k): {t: float(p) for t, p in d.items()} for k, d in self.delta.items()},
        )

    @property
    def n(self) -> int:
        return len(self.states)

    @cached_property
    def index(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.states)}

    @cached_property
    def tensors(self) -> list[np.ndarray]:
        """Per state, an array of shape ``(|gamma1|, |gamma2|, n)``."""
        out = []
        for s in self.states:
            g1, g2 = self.gamma1.get(s, ()), self.gamma2.get(s, ())
            arr = np.zeros((len(g1), len(g2), self.n))
            for i, a in enumerate(g1):
                for j, b in enumerate(g2):
                    for t, p in self.delta.get((s, a, b), {}).items():
                        if t in self.index:
                            arr[i, j, self.index[t]] = p
            out.append(arr)
        return out

    @cached_property
    def kind(self) -> StructureKind:
        return classify(self)

    def check(self) -> "GameStructure":
        diags = validate_structure(self)
        if diags:
            raise StructureError("; ".join(d.message for d in diags))
        return self

    def distribution(self, s: str, a: str, b: str) -> np.ndarray:
        g1, g2 = self.gamma1[s], self.gamma2[s]
        return self.tensors[self.index[s]][g1.index(a), g2.index(b)]


@dataclass(frozen=True, eq=False)
class MarkovChain:
    states: tuple[str, ...]
    P: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        P = np.array(self.P, dtype=float)
        P.setflags(write=False)
        object.__setattr__(self, "P", P)

    @property
    def n(self) -> int:
        return len(self.states)

    @cached_property
    def index(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.states)}

    def __eq__(self, other):
        if not isinstance(other, MarkovChain):
            return NotImplemented
        return self.states == other.states and np.array_equal(self.P, other.P)

    __hash__ = None

    @classmethod
    def from_rows(cls, states: Iterable[str], rows: Mapping[str, Mapping[str, float]]) -> "MarkovChain":
        states = tuple(states)
        idx = {s: i for i, s in enumerate(states)}
        P = np.zeros((len(states), len(states)))
        for s, dist in rows.items():
            for t, p in dist.items():
                P[idx[s], idx[t]] = p
        return cls(states, P)

    def to_game(self) -> GameStructure:
        delta = {}
        for i, s in enumerate(self.states):
            delta[(s, NO_MOVE, NO_MOVE)] = {
                t: float(self.P[i, j]) for j, t in enumerate(self.states) if self.P[i, j] > 0
            }
        return GameStructure(
            states=self.states,
            moves=(NO_MOVE,),
            gamma1={s: (NO_MOVE,) for s in self.states},
            gamma2={s: (NO_MOVE,) for s in self.states},
            delta=delta,
        )

    def validate(self) -> list[Diagnostic]:
        return validate_structure(self.to_game())


Structure = Union[GameStructure, MarkovChain]


def as_game(G: Structure) -> GameStructure:
    return G.to_game() if isinstance(G, MarkovChain) else G


def as_chain(G: Structure) -> MarkovChain:
    if isinstance(G, MarkovChain):
        return G
    if classify(G) is not StructureKind.MARKOV_CHAIN:
        raise StructureError(f"expected a Markov chain, got {classify(G).value}")
    return MarkovChain(G.states, np.array([T[0, 0] for T in G.tensors]))


@dataclass(frozen=True)
class ParityObjective:
    priority: Mapping[str, int]

    def __post_init__(self):
        object.__setattr__(self, "priority", {s: int(p) for s, p in self.priority.items()})
        if any(p < 0 for p in self.priority.values()):
            raise ValueError("priorities must be nonnegative")

    def vector(self, states: Iterable[str]) -> np.ndarray:
        try:
            return np.array([self.priority[s] for s in states], dtype=int)
        except KeyError as exc:
            raise ValueError(f"no priority for state {exc.args[0]!r}") from None

    def shifted(self, k: int = 1) -> "ParityObjective":
        """Complement objective for odd ``k``: the opponent's parity condition."""
        return ParityObjective({s: p + k for s, p in self.priority.items()})


@dataclass(frozen=True)
class DiscountSpec:
    lam: Mapping[str, float]
    reward: Mapping[str, float]

    def __post_init__(self):
        object.__setattr__(self, "lam", {s: float(v) for s, v in self.lam.items()})
        object.__setattr__(self, "reward", {s: float(v) for s, v in self.reward.items()})
        for s, v in self.lam.items():
            if not 0.0 < v < 1.0:
                raise ValueError(f"discount for {s!r} must lie in (0,1), got {v}")
        for s, v in self.reward.items():
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"reward for {s!r} must lie in [0,1], got {v}")

    def vectors(self, states: Iterable[str]) -> tuple[np.ndarray, np.ndarray]:
        states = list(states)
        try:
            lam = np.array([self.lam[s] for s in states])
            r = np.array([self.reward[s] for s in states])
        except KeyError as exc:
            raise ValueError(f"discount spec missing state {exc.args[0]!r}") from None
        return lam, r


Objective = Union[ParityObjective, DiscountSpec]


@dataclass(frozen=True)
class MemorylessStrategy:
    owner: int
    assignment: Mapping[str, Mapping[str, float]]

    def __post_init__(self):
        if self.owner not in (1, 2):
            raise ValueError("owner must be 1 or 2")
        object.__setattr__(
            self,
            "assignment",
            {s: {m: float(p) for m, p in d.items()} for s, d in self.assignment.items()},
        )

    @classmethod
    def pure(cls, owner: int, choice: Mapping[str, str]) -> "MemorylessStrategy":
        return cls(owner, {s: {m: 1.0} for s, m in choice.items()})

    @property
    def is_pure(self) -> bool:
        return all(
            sum(1 for p in d.values() if p > SUPPORT_EPS) == 1 for d in self.assignment.values()
        )

    def choice(self, s: str) -> str:
        d = self.assignment[s]
        return max(d, key=lambda m: d[m])

    def as_choices(self) -> dict[str, str]:
        return {s: self.choice(s) for s in self.assignment}


@dataclass(frozen=True)
class DistanceReport:
    absolute: float
    ratio: float
    structurally_equivalent: bool
    eta: float


def classify(G: Structure) -> StructureKind:
    G = as_game(G)
    n1 = [len(G.gamma1.get(s, ())) for s in G.states]
    n2 = [len(G.gamma2.get(s, ())) for s in G.states]
    if all(a <= 1 for a in n1) and all(b <= 1 for b in n2):
        return StructureKind.MARKOV_CHAIN
    if all(b <= 1 for b in n2):
        return StructureKind.MDP_PLAYER1
    if all(a <= 1 for a in n1):
        return StructureKind.MDP_PLAYER2
    if all(a <= 1 or b <= 1 for a, b in zip(n1, n2)):
        return StructureKind.TURN_BASED
    return StructureKind.CONCURRENT


def validate_structure(G: Structure) -> list[Diagnostic]:
    """Collect every violated invariant; never raises."""
    G = as_game(G)
    diags: list[Diagnostic] = []
    known_states = set(G.states)
    known_moves = set(G.moves)
    if len(known_states) != len(G.states):
        diags.append(Diagnostic("duplicate state", None, "duplicate state identifiers"))
    if len(known_moves) != len(G.moves):
        diags.append(Diagnostic("duplicate move", None, "duplicate move identifiers"))
    expected = set()
    for s in G.states:
        for player, gamma in ((1, G.gamma1), (2, G.gamma2)):
            ms = gamma.get(s, ())
            if not ms:
                diags.append(
                    Diagnostic("empty move set", s, f"state {s!r}: empty move set for player {player}")
                )
            for m in ms:
                if m not in known_moves:
                    diags.append(
                        Diagnostic("unknown move", s, f"state {s!r}: unknown move {m!r} for player {player}")
                    )
        for a in G.gamma1.get(s, ()):
            for b in G.gamma2.get(s, ()):
                expected.add((s, a, b))
    for key in expected:
        s, a, b = key
        if key not in G.delta:
            diags.append(
                Diagnostic("missing transition", s, f"state {s!r}, moves ({a!r},{b!r}): no distribution", (a, b))
            )
    for key, dist in G.delta.items():
        s, a, b = key
        if key not in expected:
            diags.append(
                Diagnostic(
                    "unexpected transition",
                    s,
                    f"state {s!r}, moves ({a!r},{b!r}): transition outside the move sets",
                    (a, b),
                )
            )
            continue
        bad = [t for t in dist if t not in known_states]
        if bad:
            diags.append(
                Diagnostic("unknown state", s, f"state {s!r}, moves ({a!r},{b!r}): unknown targets {bad}", (a, b))
            )
        probs = list(dist.values())
        if any(not math.isfinite(p) or p < 0 for p in probs):
            diags.append(
                Diagnostic(
                    "negative probability", s, f"state {s!r}, moves ({a!r},{b!r}): invalid probability", (a, b)
                )
            )
        total = sum(probs)
        if not any(p > SUPPORT_EPS for p in probs):
            diags.append(
                Diagnostic("empty support", s, f"state {s!r}, moves ({a!r},{b!r}): empty support", (a, b))
            )
        if not abs(total - 1.0) <= SUM_TOL:
            diags.append(
                Diagnostic(
                    "distribution sum",
                    s,
                    f"state {s!r}, moves ({a!r},{b!r}): distribution sums to {total!r}",
                    (a, b),
                )
            )
    return diags


def _check_shape(G1: GameStructure, G2: GameStructure) -> None:
    if G1.states != G2.states:
        raise ShapeMismatch("different state sets")
    if set(G1.moves) != set(G2.moves):
        raise ShapeMismatch("different move sets")
    for s in G1.states:
        if G1.gamma1[s] != G2.gamma1[s] or G1.gamma2[s] != G2.gamma2[s]:
            raise ShapeMismatch(f"different available moves at state {s!r}")


def supports_equal(p: np.ndarray, q: np.ndarray) -> bool:
    return bool(np.array_equal(p > SUPPORT_EPS, q > SUPPORT_EPS))


def structurally_equivalent(G1: Structure, G2: Structure) -> bool:
    G1, G2 = as_game(G1), as_game(G2)
    _check_shape(G1, G2)
    return all(supports_equal(A, B) for A, B in zip(G1.tensors, G2.tensors))


def absolute_distance(G1: Structure, G2: Structure) -> float:
    G1, G2 = as_game(G1), as_game(G2)
    _check_shape(G1, G2)
    return max(float(np.max(np.abs(A - B))) for A, B in zip(G1.tensors, G2.tensors))


def ratio_distance(G1: Structure, G2: Structure) -> float:
    G1, G2 = as_game(G1), as_game(G2)
    if not structurally_equivalent(G1, G2):
        raise NotStructurallyEquivalent("ratio distance infinite: supports differ")
    worst = 1.0
    for A, B in zip(G1.tensors, G2.tensors):
        mask = A > SUPPORT_EPS
        if mask.any():
            a, b = A[mask], B[mask]
            worst = max(worst, float(np.max(a / b)), float(np.max(b / a)))
    return worst - 1.0


def min_positive_probability(G: Structure) -> float:
    G = as_game(G)
    eta = math.inf
    for A in G.tensors:
        pos = A[A > SUPPORT_EPS]
        if pos.size:
            eta = min(eta, float(pos.min()))
    return eta


def distance_report(G1: Structure, G2: Structure) -> DistanceReport:
    equiv = structurally_equivalent(G1, G2)
    return DistanceReport(
        absolute=absolute_distance(G1, G2),
        ratio=ratio_distance(G1, G2) if equiv else math.inf,
        structurally_equivalent=equiv,
        eta=min_positive_probability(G1),
    )


def restrict(G: Structure, strategy: MemorylessStrategy) -> GameStructure:
    """Fix one player's memoryless strategy; the owner's move set becomes ``{_}``."""
    G = as_game(G)
    own, other = (G.gamma1, G.gamma2) if strategy.owner == 1 else (G.gamma2, G.gamma1)
    delta: dict[tuple[str, str, str], dict[str, float]] = {}
    for s in G.states:
        mix = strategy.assignment.get(s)
        if mix is None:
            if len(own[s]) != 1:
                raise ValueError(f"strategy does not cover state {s!r}")
            mix = {own[s][0]: 1.0}
        bad = [m for m, p in mix.items() if p > 0 and m not in own[s]]
        if bad:
            raise ValueError(f"strategy uses unavailable moves {bad} at state {s!r}")
        for b in other[s]:
            acc: dict[str, float] = {}
            for a, w in mix.items():
                if w <= 0:
                    continue
                key = (s, a, b) if strategy.owner == 1 else (s, b, a)
                for t, p in G.delta[key].items():
                    acc[t] = acc.get(t, 0.0) + w * p
            key = (s, NO_MOVE, b) if strategy.owner == 1 else (s, b, NO_MOVE)
            delta[key] = {t: acc[t] for t in G.states if t in acc}
    fixed = {s: (NO_MOVE,) for s in G.states}
    moves = G.moves if NO_MOVE in G.moves else G.moves + (NO_MOVE,)
    if strategy.owner == 1:
        return GameStructure(G.states, moves, fixed, dict(G.gamma2), delta)
    return GameStructure(G.states, moves, dict(G.gamma1), fixed, delta)


def restrict_player1(G: Structure, pi1: MemorylessStrategy) -> GameStructure:
    if pi1.owner != 1:
        raise ValueError("expected a player-1 strategy")
    return restrict(G, pi1)


def restrict_player2(G: Structure, pi2: MemorylessStrategy) -> GameStructure:
    if pi2.owner != 2:
        raise ValueError("expected a player-2 strategy")
    return restrict(G, pi2)


@dataclass
class StateActions:
    """Turn-based view of one state: who chooses and the available rows."""

    owner: int  # 1 or 2; states without a real choice are given to player 1
    moves: list[str] = field(default_factory=list)
    rows: list[np.ndarray] = field(default_factory=list)


def turn_view(G: Structure) -> list[StateActions]:
    G = as_game(G)
    view = []
    for s, T in zip(G.states, G.tensors):
        k1, k2 = T.shape[0], T.shape[1]
        if k1 > 1 and k2 > 1:
            raise StructureError(f"state {s!r} is concurrent; a turn-based view is undefined")
        if k2 > 1:
            view.append(StateActions(2, list(G.gamma2[s]), [T[0, j] for j in range(k2)]))
        else:
            view.append(StateActions(1, list(G.gamma1[s]), [T[i, 0] for i in range(k1)]))
    return view


def strategy_from_choices(G: Structure, owner: int, idx: Iterable[int]) -> MemorylessStrategy:
    """Pure strategy from per-state action indices into :func:`turn_view` rows."""
    G = as_game(G)
    view = turn_view(G)
    choice = {}
    for s, v, k in zip(G.states, view, idx):
        if v.owner == owner:
            choice[s] = v.moves[k]
        else:
            gamma = G.gamma1 if owner == 1 else G.gamma2
            choice[s] = gamma[s][0]
    return MemorylessStrategy.pure(owner, choice)
