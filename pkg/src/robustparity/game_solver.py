"""Two-player solving.

Matrix games by a small dense simplex, concurrent multi-discounted games by
Shapley iteration or Hoffman-Karp strategy iteration, turn-based parity games
by strategy improvement (with an exhaustive fallback), and concurrent parity
values approximated through nested discount limits.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .chain_solver import discounted_values_stable, parity_values
from .decision_solver import (
    ENUM_BUDGET,
    EnumerationBudgetExceeded,
    SolveResult,
    _MDP,
    _parity_max,
)
from .game_core import (
    SUPPORT_EPS,
    DiscountSpec,
    GameStructure,
    MemorylessStrategy,
    ParityObjective,
    Structure,
    StructureError,
    StructureKind,
    as_game,
    classify,
    strategy_from_choices,
    turn_view,
)
from .qualitative import Arena, almost_sure_p1

PIVOT_TOL = 1e-12
VALUE_TOL = 1e-9
DISC_IMPROVE = 1e-14
IMPROVE_TOL = 1e-12


# --- matrix games -----------------------------------------------------------


@dataclass(frozen=True)
class MatrixGame:
    payoff: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.array(self.payoff, dtype=float))
        if A.size == 0:
            raise ValueError("matrix game must be nonempty")
        if not np.all(np.isfinite(A)):
            raise ValueError("matrix game entries must be finite")
        object.__setattr__(self, "payoff", A)


@dataclass(frozen=True)
class MatrixGameSolution:
    value: float
    row: np.ndarray
    col: np.ndarray


def _simplex_max(B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Solve ``max 1'w  s.t.  B w <= 1, w >= 0`` for ``B > 0``; returns (w, duals)."""
    m, n = B.shape
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = B
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = 1.0
    T[m, :n] = -1.0
    basis = list(range(n, n + m))
    for _ in range(10_000):
        cols = np.flatnonzero(T[m, :-1] < -PIVOT_TOL)
        if cols.size == 0:
            break
        j = int(cols[0])  # Bland: lowest index entering
        col = T[:m, j]
        rows = np.flatnonzero(col > PIVOT_TOL)
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + PIVOT_TOL * max(1.0, best)]
        i = int(min(ties, key=lambda r: basis[r]))
        T[i] /= T[i, j]
        for r in range(m + 1):
            if r != i and T[r, j] != 0.0:
                T[r] -= T[r, j] * T[i]
        basis[i] = j
    else:
        raise RuntimeError("simplex did not terminate")
    w = np.zeros(n)
    for i, b in enumerate(basis):
        if b < n:
            w[b] = T[i, -1]
    return w, T[m, n : n + m].copy()


def matrix_game_value(mg: MatrixGame | np.ndarray) -> MatrixGameSolution:
    """Value and optimal mixtures; rows maximize, columns minimize."""
    A = mg.payoff if isinstance(mg, MatrixGame) else MatrixGame(mg).payoff
    lo, hi = float(A.min()), float(A.max())
    if hi - lo <= 0.0:
        m, n = A.shape
        return MatrixGameSolution(lo, np.full(m, 1.0 / m), np.full(n, 1.0 / n))
    shift = 1.0 - lo
    w, duals = _simplex_max(A + shift)
    total = w.sum()
    y = w / total
    x = np.clip(duals, 0.0, None)
    x = x / x.sum()
    # report the value certified by both mixtures
    lower = float((x @ A).min())
    upper = float((A @ y).max())
    return MatrixGameSolution(0.5 * (lower + upper), x, y)


# --- concurrent multi-discounted --------------------------------------------


@dataclass
class ConcurrentResult:
    values: np.ndarray
    strategy1: MemorylessStrategy
    strategy2: MemorylessStrategy
    iterations: int = 0
    residuals: list[float] = field(default_factory=list)
    meta: dict = field(default_factory=dict)


def _local_games(G: GameStructure, mu: np.ndarray, r: np.ndarray, v: np.ndarray) -> list[np.ndarray]:
    return [mu[s] * r[s] + (1.0 - mu[s]) * (T @ v) for s, T in enumerate(G.tensors)]


def _mixed(G: GameStructure, owner: int, mixes: Sequence[np.ndarray]) -> MemorylessStrategy:
    gamma = G.gamma1 if owner == 1 else G.gamma2
    return MemorylessStrategy(
        owner,
        {s: {m: float(p) for m, p in zip(gamma[s], x) if p > 0} for s, x in zip(G.states, mixes)},
    )


def _shapley(G: GameStructure, lam: np.ndarray, r: np.ndarray, tol: float):
    mu = 1.0 - lam
    lmax = float(lam.max())
    threshold = tol * (1.0 - lmax) / (2.0 * lmax)
    v = np.zeros(G.n)
    residuals = []
    while True:
        sols = [matrix_game_value(M) for M in _local_games(G, mu, r, v)]
        nv = np.array([s.value for s in sols])
        step = float(np.max(np.abs(nv - v)))
        residuals.append(step)
        v = nv
        if step <= threshold:
            break
    return v, [s.row for s in sols], [s.col for s in sols], residuals


def _mdp_discounted_pi(rows, mu, r, maximize: bool, start=None):
    """Policy iteration for a one-player discounted chain family with exact stable evaluation."""
    n = len(rows)
    choice = list(start) if start is not None else [0] * n
    seen = set()
    while True:
        P = np.array([rows[s][k] for s, k in enumerate(choice)])
        v = discounted_values_stable(P, mu, r)
        key = tuple(choice)
        if key in seen:
            return v, choice
        seen.add(key)
        switched = False
        for s in range(n):
            q = np.array([mu[s] * r[s] + (1.0 - mu[s]) * (row @ v) for row in rows[s]])
            cur = q[choice[s]]
            if maximize and q.max() > cur + DISC_IMPROVE:
                choice[s] = int(np.argmax(q))
                switched = True
            elif not maximize and q.min() < cur - DISC_IMPROVE:
                choice[s] = int(np.argmin(q))
                switched = True
        if not switched:
            return v, choice


def _fixed_rows(G: GameStructure, owner: int, mixes):
    """Rows of the one-player MDP obtained by fixing ``owner``'s mixtures."""
    out = []
    for T, x in zip(G.tensors, mixes):
        if owner == 1:
            out.append([x @ T[:, b, :] for b in range(T.shape[1])])
        else:
            out.append([x @ T[a, :, :] for a in range(T.shape[0])])
    return out


def hoffman_karp(G: GameStructure, mu: np.ndarray, r: np.ndarray, max_iter: int = 500):
    """Strategy iteration for player 1 with exact player-2 best responses.

    Works with ``mu = 1 - lambda`` directly, so discounts arbitrarily close
    to one are evaluated without cancellation.  Returns the lower value
    (player 1's guarantee), the upper value (player 2's guarantee) and both
    mixtures.
    """
    v0 = np.asarray(r, dtype=float)
    x = [matrix_game_value(M).row for M in _local_games(G, mu, r, v0)]
    br = None
    for it in range(1, max_iter + 1):
        u, br = _mdp_discounted_pi(_fixed_rows(G, 1, x), mu, r, maximize=False, start=br)
        sols = [matrix_game_value(M) for M in _local_games(G, mu, r, u)]
        gain = max(s.value - ui for s, ui in zip(sols, u))
        if gain <= DISC_IMPROVE * 10:
            break
        x = [s.row for s in sols]
    y = [s.col for s in sols]
    w, _ = _mdp_discounted_pi(_fixed_rows(G, 2, y), mu, r, maximize=True)
    return u, w, x, y, it


def multidiscounted_value_concurrent(
    G: Structure, spec: DiscountSpec, tol: float = 1e-9, method: str = "shapley"
) -> ConcurrentResult:
    """Value of a concurrent multi-discounted game and randomized memoryless strategies."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    G = as_game(G)
    lam, r = spec.vectors(G.states)
    if method == "shapley":
        v, xs, ys, residuals = _shapley(G, lam, r, tol)
        return ConcurrentResult(
            v, _mixed(G, 1, xs), _mixed(G, 2, ys), len(residuals), residuals, {"tol": tol, "method": method}
        )
    if method == "strategy-iteration":
        lo, hi, xs, ys, it = hoffman_karp(G, 1.0 - lam, r)
        return ConcurrentResult(
            0.5 * (lo + hi),
            _mixed(G, 1, xs),
            _mixed(G, 2, ys),
            it,
            [float(np.max(hi - lo))],
            {"tol": tol, "method": method, "lower": lo.tolist(), "upper": hi.tolist()},
        )
    raise ValueError(f"unknown method {method!r}")


# --- turn-based parity ------------------------------------------------------


@dataclass
class GameSolveResult:
    values: np.ndarray
    strategy1: MemorylessStrategy
    strategy2: MemorylessStrategy
    meta: dict = field(default_factory=dict)

    def player(self, k: int) -> SolveResult:
        return SolveResult(self.values, self.strategy1 if k == 1 else self.strategy2, meta=self.meta)


@dataclass
class _TB:
    owner: list[int]
    rows: list[list[np.ndarray]]

    @property
    def n(self) -> int:
        return len(self.rows)

    def swapped(self) -> "_TB":
        return _TB([3 - o for o in self.owner], self.rows)

    def fix(self, owner: int, choice: Sequence[int]) -> _MDP:
        """One-player MDP for the opponent once ``owner`` commits to ``choice``."""
        rows = [[rs[choice[s]]] if self.owner[s] == owner else rs for s, rs in enumerate(self.rows)]
        return _MDP(3 - owner, [[""] * len(r) for r in rows], rows)


def _tb_view(G: GameStructure) -> _TB:
    if classify(G) is StructureKind.CONCURRENT:
        raise StructureError("game has concurrent states; use the concurrent approximation")
    view = turn_view(G)
    return _TB([v.owner for v in view], [v.rows for v in view])


def _p1_guarantee(tb: _TB, choice: Sequence[int], prio: np.ndarray):
    """Value of player 1's fixed strategy and player 2's best response to it."""
    dual, resp, _ = _parity_max(tb.fix(1, choice), prio + 1)
    return 1.0 - dual, resp


def _tie_step(tb: _TB, prio: np.ndarray, choice: list[int], v: np.ndarray) -> dict[int, int]:
    """Value-preserving qualitative improvement when no strict switch exists.

    Builds the arena where player 1 keeps only value-preserving actions,
    player-2 actions that raise the value count as wins, and actions whose
    support straddles value classes count as losses.  Player 1's almost-sure
    region there, restricted to states with value below one, yields a switch.
    """
    arena = Arena([], [], [])
    top = int(prio.max()) + 2
    neutral = top if top % 2 == 0 else top + 1  # never the least priority on a cycle
    for s in range(tb.n):
        arena.add(tb.owner[s], int(prio[s]))
    win = arena.add(0, 0)
    arena.succ[win].append(win)
    lose = arena.add(0, 1)
    arena.succ[lose].append(lose)
    action_vertex: dict[int, tuple[int, int]] = {}
    for s in range(tb.n):
        for k, row in enumerate(tb.rows[s]):
            q = float(row @ v)
            if tb.owner[s] == 1 and q < v[s] - VALUE_TOL:
                continue
            if tb.owner[s] == 2 and q > v[s] + VALUE_TOL:
                arena.succ[s].append(win)
                continue
            supp = np.flatnonzero(row > SUPPORT_EPS)
            if np.ptp(v[supp]) > VALUE_TOL:
                arena.succ[s].append(lose)
                continue
            a = arena.add(0, neutral, [int(t) for t in supp])
            action_vertex[a] = (s, k)
            arena.succ[s].append(a)
    good, sigma = almost_sure_p1(arena)
    switch = {}
    for s in range(tb.n):
        if tb.owner[s] == 1 and s in good and v[s] < 1.0 - VALUE_TOL and s in sigma:
            target = sigma[s]
            if target in action_vertex:
                k = action_vertex[target][1]
                if k != choice[s]:
                    switch[s] = k
    return switch


def _improve(tb: _TB, prio: np.ndarray, max_iter: int = 10_000):
    """Strategy improvement for player 1; returns (values, choice, cycled)."""
    choice = [0] * tb.n
    seen = set()
    for _ in range(max_iter):
        key = tuple(choice)
        if key in seen:
            return None, choice, True
        seen.add(key)
        v, _ = _p1_guarantee(tb, choice, prio)
        switched = False
        for s in range(tb.n):
            if tb.owner[s] != 1 or len(tb.rows[s]) == 1:
                continue
            q = np.array([row @ v for row in tb.rows[s]])
            if q.max() > v[s] + IMPROVE_TOL:
                choice[s] = int(np.flatnonzero(q >= q.max() - IMPROVE_TOL)[0])
                switched = True
        if switched:
            continue
        switch = _tie_step(tb, prio, choice, v)
        if not switch:
            return v, choice, False
        for s, k in switch.items():
            choice[s] = k
    return None, choice, True




def _enumerate(tb: _TB, prio: np.ndarray, budget: int = ENUM_BUDGET):
    sizes = [len(r) for r in tb.rows]
    total = math.prod(sizes)
    if total > budget:
        raise EnumerationBudgetExceeded(f"{total} strategy profiles exceed the budget {budget}")
    p1 = [s for s in range(tb.n) if tb.owner[s] == 1]
    p2 = [s for s in range(tb.n) if tb.owner[s] == 2]
    opts1 = list(itertools.product(*(range(sizes[s]) for s in p1)))
    opts2 = list(itertools.product(*(range(sizes[s]) for s in p2)))
    table = np.empty((len(opts1), len(opts2), tb.n))
    for i, c1 in enumerate(opts1):
        for j, c2 in enumerate(opts2):
            choice = [0] * tb.n
            for s, k in zip(p1, c1):
                choice[s] = k
            for s, k in zip(p2, c2):
                choice[s] = k
            P = np.array([tb.rows[s][choice[s]] for s in range(tb.n)])
            table[i, j] = parity_values(P, prio)
    worst1 = table.min(axis=1)  # per player-1 strategy
    worst2 = table.max(axis=0)  # per player-2 strategy
    lower = worst1.max(axis=0)
    upper = worst2.min(axis=0)

    def pick(vectors, target, options, states):
        i = int(np.argmin(np.abs(vectors - target).max(axis=1)))
        choice = [0] * tb.n
        for s, k in zip(states, options[i]):
            choice[s] = k
        return choice

    return lower, upper, pick(worst1, lower, opts1, p1), pick(worst2, upper, opts2, p2)


def parity_value_turnbased(G: Structure, p: ParityObjective, method: str = "improvement") -> GameSolveResult:
    """Exact values and pure memoryless optimal strategies for both players.

    ``improvement`` runs strategy improvement for each player and certifies
    that the two guarantees meet; if they do not (or a strategy cycle is
    seen) the exhaustive method is used instead and ``meta['fallback']``
    records it.
    """
    G = as_game(G)
    tb = _tb_view(G)
    prio = p.vector(G.states)
    meta: dict = {"method": method, "fallback": False}
    if method == "improvement":
        v1, c1, cyc1 = _improve(tb, prio)
        w2, c2, cyc2 = _improve(tb.swapped(), prio + 1)
        if not (cyc1 or cyc2):
            upper = 1.0 - w2
            gap = float(np.max(np.abs(upper - v1)))
            meta["certificate_gap"] = gap
            if gap <= VALUE_TOL:
                return GameSolveResult(
                    v1, strategy_from_choices(G, 1, c1), strategy_from_choices(G, 2, c2), meta
                )
        meta["fallback"] = True
        meta["cycle"] = bool(cyc1 or cyc2)
    elif method != "enumeration":
        raise ValueError(f"unknown method {method!r}")
    lower, upper, c1, c2 = _enumerate(tb, prio)
    gap = float(np.max(np.abs(upper - lower)))
    meta["determinacy_gap"] = gap
    if gap > VALUE_TOL:
        raise RuntimeError(f"sup-inf and inf-sup differ by {gap}")
    return GameSolveResult(lower, strategy_from_choices(G, 1, c1), strategy_from_choices(G, 2, c2), meta)


def strategy_value_turnbased(G: Structure, p: ParityObjective, strategy: MemorylessStrategy) -> np.ndarray:
    """Exact value guaranteed by a pure memoryless strategy of either player (player-1 scale)."""
    G = as_game(G)
    tb = _tb_view(G)
    prio = p.vector(G.states)
    view = turn_view(G)
    choice = []
    for s, sv in zip(G.states, view):
        if sv.owner == strategy.owner:
            choice.append(sv.moves.index(strategy.choice(s)))
        else:
            choice.append(0)
    if strategy.owner == 1:
        return _p1_guarantee(tb, choice, prio)[0]
    w, _ = _p1_guarantee(tb.swapped(), choice, prio + 1)
    return 1.0 - w


# --- nested discount limits --------------------------------------------------


@dataclass(frozen=True)
class LimitSchedule:
    """State order for the nested limits and the rung range of the discount ladder.

    The first state is the outermost limit.  Consecutive states whose
    priorities share a parity form one level; at rung ``k`` level ``j`` uses
    ``1 - lambda = 2**(-k (j+1))``, so inner levels approach one faster.
    """

    order: tuple[str, ...]
    k_min: int = 4
    k_max: int = 12

    def __post_init__(self):
        object.__setattr__(self, "order", tuple(self.order))
        if len(set(self.order)) != len(self.order):
            raise ValueError("schedule order repeats a state")
        if not 1 <= self.k_min <= self.k_max:
            raise ValueError("need 1 <= k_min <= k_max")

    @classmethod
    def default(cls, G: Structure, p: ParityObjective, k_min: int = 4, k_max: int = 12) -> "LimitSchedule":
        states = as_game(G).states
        order = sorted(states, key=lambda s: (p.priority[s], states.index(s)))
        return cls(tuple(order), k_min, k_max)

    def levels(self, p: ParityObjective) -> dict[str, int]:
        out, level, last = {}, 0, None
        for s in self.order:
            par = p.priority[s] % 2
            if last is not None and par != last:
                level += 1
            out[s] = level
            last = par
        return out

    def mu(self, states: Sequence[str], p: ParityObjective, k: int) -> np.ndarray:
        if set(states) != set(self.order):
            raise ValueError("schedule order is not a permutation of the states")
        lv = self.levels(p)
        return np.array([2.0 ** (-k * (lv[s] + 1)) for s in states])


@dataclass
class ApproxResult:
    values: np.ndarray
    trace: list[dict]
    converged: bool
    schedule: LimitSchedule


def parity_value_concurrent_approx(
    G: Structure, p: ParityObjective, sched: LimitSchedule | None = None, stable: float = 1e-3
) -> ApproxResult:
    """Concurrent parity values approximated by nested multi-discounted games.

    Rewards are 1 on even priorities and 0 on odd ones.  Each rung is solved
    by strategy iteration with exact subtraction-free evaluation, which
    yields a certified bracket; the trace records every rung.
    """
    G = as_game(G)
    sched = sched or LimitSchedule.default(G, p)
    prio = p.vector(G.states)
    r = (prio % 2 == 0).astype(float)
    trace: list[dict] = []
    prev = None
    converged = False
    values = None
    for k in range(sched.k_min, sched.k_max + 1):
        mu = sched.mu(G.states, p, k)
        lo, hi, _, _, it = hoffman_karp(G, mu, r)
        values = 0.5 * (lo + hi)
        step = None if prev is None else float(np.max(np.abs(values - prev)))
        trace.append(
            {"k": k, "values": values.tolist(), "gap": float(np.max(hi - lo)), "step": step, "iterations": it}
        )
        if step is not None and step < stable and len(trace) >= 3:
            converged = True
            break
        prev = values
    return ApproxResult(values, trace, converged, sched)


def trace_monotone(trace: list[dict], last: int = 3, slack: float = 1e-12) -> bool:
    """Step sizes over the final ``last`` rungs do not grow."""
    steps = [t["step"] for t in trace[-last:] if t["step"] is not None]
    if len(steps) < last - 1:
        return False
    return all(b <= a + slack for a, b in zip(steps, steps[1:]))


__all__ = [
    "MatrixGame",
    "MatrixGameSolution",
    "matrix_game_value",
    "ConcurrentResult",
    "multidiscounted_value_concurrent",
    "hoffman_karp",
    "GameSolveResult",
    "parity_value_turnbased",
    "strategy_value_turnbased",
    "LimitSchedule",
    "ApproxResult",
    "parity_value_concurrent_approx",
    "trace_monotone",
]
