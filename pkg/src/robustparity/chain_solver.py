"""Exact Markov-chain analysis.

Bottom SCCs and reachability, parity values, mean-discounted times, the
augmented chain with absorbing copies, and exit distributions computed
either from absorption equations or by brute-force enumeration over
functions ``C -> S`` (Freidlin-Wentzell).
"""

from __future__ import annotations

import itertools
import math
from typing import Iterable

import numpy as np
import scipy.linalg
from scipy.sparse.csgraph import connected_components

from .game_core import (
    SUPPORT_EPS,
    DiscountSpec,
    MarkovChain,
    ParityObjective,
    Structure,
    as_chain,
)

LAMBDA_MAX = 1.0 - 1e-6
FW_MAX_C = 8


class SolverError(RuntimeError):
    pass


class ExitQueryError(ValueError):
    pass


def _support(P: np.ndarray) -> np.ndarray:
    return P > SUPPORT_EPS


def bscc_indices(P: np.ndarray) -> tuple[list[list[int]], list[int]]:
    adj = _support(P)
    ncomp, labels = connected_components(adj.astype(np.int8), directed=True, connection="strong")
    bottoms = []
    for c in range(ncomp):
        members = np.flatnonzero(labels == c)
        leaves = adj[members][:, labels != c].any()
        if not leaves:
            bottoms.append(members.tolist())
    bottoms.sort()
    in_bottom = {i for b in bottoms for i in b}
    transient = [i for i in range(P.shape[0]) if i not in in_bottom]
    return bottoms, transient


def bscc_decomposition(M: Structure) -> tuple[list[list[str]], list[str]]:
    """Bottom strongly connected components and the remaining transient states."""
    M = as_chain(M)
    bottoms, transient = bscc_indices(M.P)
    names = M.states
    return [[names[i] for i in b] for b in bottoms], [names[i] for i in transient]


def can_reach(adj: np.ndarray, target: Iterable[int]) -> np.ndarray:
    """Boolean mask of states with a path (length >= 0) into ``target``."""
    n = adj.shape[0]
    mark = np.zeros(n, dtype=bool)
    stack = list(target)
    mark[stack] = True
    preds = adj.T
    while stack:
        j = stack.pop()
        for i in np.flatnonzero(preds[j] & ~mark):
            mark[i] = True
            stack.append(int(i))
    return mark


def reach_probabilities(P: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Probability of ever entering ``target`` (boolean mask)."""
    n = P.shape[0]
    v = np.zeros(n)
    v[target] = 1.0
    if not target.any():
        return v
    adj = _support(P)
    live = can_reach(adj, np.flatnonzero(target)) & ~target
    # probability one where no path avoiding the target leads to a dead state
    cut = adj.copy()
    cut[target] = False
    doomed = can_reach(cut, np.flatnonzero(~live & ~target))
    sure = live & ~doomed
    v[sure] = 1.0
    live &= doomed
    idx = np.flatnonzero(live)
    if idx.size:
        A = np.eye(idx.size) - P[np.ix_(idx, idx)]
        b = P[np.ix_(idx, np.flatnonzero(target | sure))].sum(axis=1)
        try:
            x = scipy.linalg.solve(A, b)
        except scipy.linalg.LinAlgError as exc:
            raise SolverError("singular reachability system") from exc
        v[idx] = np.clip(x, 0.0, 1.0)
    return v


def reachability_values(M: Structure, target: Iterable[str]) -> np.ndarray:
    M = as_chain(M)
    mask = np.zeros(M.n, dtype=bool)
    for s in target:
        mask[M.index[s]] = True
    return reach_probabilities(M.P, mask)


def winning_bscc_mask(P: np.ndarray, prio: np.ndarray) -> np.ndarray:
    bottoms, _ = bscc_indices(P)
    win = np.zeros(P.shape[0], dtype=bool)
    for b in bottoms:
        if prio[b].min() % 2 == 0:
            win[b] = True
    return win


def parity_values(P: np.ndarray, prio: np.ndarray) -> np.ndarray:
    return reach_probabilities(P, winning_bscc_mask(P, prio))


def parity_value_mc(M: Structure, p: ParityObjective) -> np.ndarray:
    """Probability that the least priority seen infinitely often is even."""
    M = as_chain(M)
    return parity_values(M.P, p.vector(M.states))


def _check_lambda(lam: np.ndarray) -> None:
    if np.any(lam <= 0) or np.any(lam > LAMBDA_MAX):
        raise ValueError(f"discount factors must lie in (0, {LAMBDA_MAX}]")


def mean_discounted_time_matrix(P: np.ndarray, lam: np.ndarray) -> np.ndarray:
    _check_lambda(lam)
    n = P.shape[0]
    A = np.eye(n) - lam[:, None] * P
    lu = scipy.linalg.lu_factor(A)
    return scipy.linalg.lu_solve(lu, np.diag(1.0 - lam))


def mean_discounted_time(M: Structure, spec: DiscountSpec) -> np.ndarray:
    """``MT[s0, s]``: expected normalized discounted occupancy of ``s`` from ``s0``.

    Column ``s`` solves ``y_t = (1-lam_t)[t == s] + lam_t * sum_z P[t,z] y_z``;
    one LU factorization of ``I - diag(lam) P`` serves all columns.
    """
    M = as_chain(M)
    lam, _ = spec.vectors(M.states)
    return mean_discounted_time_matrix(M.P, lam)


def discounted_values(P: np.ndarray, lam: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Fixed point of ``v = (1-lam) r + lam P v``."""
    _check_lambda(lam)
    A = np.eye(P.shape[0]) - lam[:, None] * P
    return scipy.linalg.solve(A, (1.0 - lam) * r)


def multidiscounted_value_mc(M: Structure, spec: DiscountSpec) -> np.ndarray:
    M = as_chain(M)
    _, r = spec.vectors(M.states)
    return mean_discounted_time(M, spec) @ r


def multidiscounted_value_fixed_point(M: Structure, spec: DiscountSpec) -> np.ndarray:
    M = as_chain(M)
    lam, r = spec.vectors(M.states)
    return discounted_values(M.P, lam, r)


def discounted_values_stable(P: np.ndarray, mu: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Values of ``v = mu r + (1-mu) P v`` by subtraction-free state reduction.

    ``mu = 1 - lambda`` is passed directly so that discounts extremely close to
    one keep full relative precision.  Every state is a transient state of the
    augmented chain that leaves through its copy with probability ``mu``;
    eliminating states one at a time only ever adds nonnegative numbers.
    """
    n = P.shape[0]
    Q = (1.0 - mu)[:, None] * np.asarray(P, dtype=float)
    np.fill_diagonal(Q, 0.0)
    exit_mass = np.array(mu, dtype=float)
    exit_value = exit_mass * r
    alive = np.ones(n, dtype=bool)
    saved = []
    for k in range(n - 1, -1, -1):
        alive[k] = False
        out = exit_mass[k] + Q[k, alive].sum()
        row = Q[k].copy()
        saved.append((k, row, out, exit_value[k]))
        rows = np.flatnonzero(alive & (Q[:, k] > 0))
        if rows.size:
            f = Q[rows, k] / out
            Q[rows] += f[:, None] * row[None, :]
            Q[rows, k] = 0.0
            Q[rows, rows] = 0.0
            exit_mass[rows] += f * exit_mass[k]
            exit_value[rows] += f * exit_value[k]
    v = np.zeros(n)
    done = np.zeros(n, dtype=bool)
    for k, row, out, w in reversed(saved):
        v[k] = (w + row[done] @ v[done]) / out
        done[k] = True
    return v


def copy_name(s: str) -> str:
    return f"{s}'"


def augmented_chain(M: Structure, spec: DiscountSpec) -> MarkovChain:
    """Chain on ``S + S'`` where each ``s`` moves to its absorbing copy ``s'`` w.p. ``1-lam(s)``."""
    M = as_chain(M)
    lam, _ = spec.vectors(M.states)
    copies = tuple(copy_name(s) for s in M.states)
    if set(copies) & set(M.states):
        raise ValueError("copy state names collide with existing states")
    n = M.n
    P = np.zeros((2 * n, 2 * n))
    P[:n, :n] = lam[:, None] * M.P
    P[np.arange(n), n + np.arange(n)] = 1.0 - lam
    P[n + np.arange(n), n + np.arange(n)] = 1.0
    return MarkovChain(M.states + copies, P)


def _exit_setup(M: MarkovChain, C: Iterable[str], s1: str) -> tuple[list[int], list[int], int]:
    cset = set(C)
    unknown = cset - set(M.states)
    if unknown:
        raise ExitQueryError(f"unknown states in C: {sorted(unknown)}")
    if s1 not in cset:
        raise ExitQueryError("initial state must belong to C")
    inside = [i for i, s in enumerate(M.states) if s in cset]
    outside = [i for i, s in enumerate(M.states) if s not in cset]
    if not outside:
        raise ExitQueryError("C must be a proper subset of the states")
    reach = can_reach(_support(M.P), outside)
    stuck = [M.states[i] for i in inside if not reach[i]]
    if stuck:
        raise ExitQueryError(f"states cannot leave C: {stuck}")
    return inside, outside, M.index[s1]


def exit_distribution(
    M: Structure, C: Iterable[str], s1: str, method: str = "linear"
) -> dict[str, float]:
    """Distribution of the first state outside ``C`` when starting from ``s1``."""
    M = as_chain(M)
    inside, outside, start = _exit_setup(M, C, s1)
    if method == "linear":
        probs = _exit_linear(M.P, inside, outside, start)
    elif method == "freidlin-wentzell":
        if len(inside) > FW_MAX_C:
            raise ExitQueryError(f"|C| = {len(inside)} exceeds the enumeration limit {FW_MAX_C}")
        probs = _exit_fw(M.P, inside, outside, start)
    else:
        raise ValueError(f"unknown method {method!r}")
    return {M.states[t]: float(p) for t, p in zip(outside, probs)}


def _exit_linear(P, inside, outside, start) -> np.ndarray:
    A = np.eye(len(inside)) - P[np.ix_(inside, inside)]
    B = P[np.ix_(inside, outside)]
    X = scipy.linalg.solve(A, B)
    return X[inside.index(start)]


def _exit_fw(P, inside, outside, start) -> np.ndarray:
    """Ratio of weighted sums over functions ``f: C -> S`` (acyclic ones only).

    Functions with zero weight are skipped by ranging each ``f(s)`` over the
    support of ``P[s]``.
    """
    choices = [np.flatnonzero(P[s] > 0).tolist() for s in inside]
    pos = {s: k for k, s in enumerate(inside)}
    out_pos = {t: k for k, t in enumerate(outside)}
    numer = [0.0] * len(outside)
    denom = 0.0
    for f in itertools.product(*choices):
        # follow the unique f-path from each state of C; out-degree 1 so cycles are found by revisits
        end = [-1] * len(inside)
        acyclic = True
        for k0 in range(len(inside)):
            if end[k0] >= 0:
                continue
            path = []
            k = k0
            seen = set()
            while True:
                if end[k] >= 0:
                    target = end[k]
                    break
                if k in seen:
                    acyclic = False
                    break
                seen.add(k)
                path.append(k)
                nxt = f[k]
                if nxt in pos:
                    k = pos[nxt]
                else:
                    target = nxt
                    break
            if not acyclic:
                break
            for k in path:
                end[k] = target
        if not acyclic:
            continue
        w = math.prod(P[s, t] for s, t in zip(inside, f))
        denom += w
        numer[out_pos[end[pos[start]]]] += w
    return np.array(numer) / denom


def mt_via_exit(M: Structure, spec: DiscountSpec, s0: str, method: str = "linear") -> dict[str, float]:
    """Mean-discounted times from ``s0`` read off as exit probabilities of the augmented chain."""
    M = as_chain(M)
    aug = augmented_chain(M, spec)
    dist = exit_distribution(aug, M.states, s0, method=method)
    return {s: dist[copy_name(s)] for s in M.states}

