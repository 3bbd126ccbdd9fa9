"""Perturbation bounds, beta thresholds, perturbation generation and certificates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .chain_solver import multidiscounted_value_fixed_point, parity_value_mc
from .decision_solver import multidiscounted_value_mdp, parity_value_mdp
from .game_core import (
    SUPPORT_EPS,
    GameStructure,
    MemorylessStrategy,
    Objective,
    ParityObjective,
    Structure,
    StructureError,
    StructureKind,
    NotStructurallyEquivalent,
    absolute_distance,
    as_game,
    classify,
    min_positive_probability,
    ratio_distance,
    restrict_player1,
    structurally_equivalent,
)
from .game_solver import multidiscounted_value_concurrent, parity_value_turnbased

# documented accuracy of each solver family, added to certificate margins
EXACT_TOL = 1e-10
ITERATIVE_TOL = 1e-9


@dataclass(frozen=True)
class BoundInputs:
    n: int
    eps_R: float | None = None
    eps_A: float | None = None
    eta: float | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.eps_R is None:
            if self.eps_A is None or self.eta is None:
                raise ValueError("give eps_R, or both eps_A and eta")
            if self.eps_A < 0:
                raise ValueError("eps_A must be nonnegative")
            if not 0 < self.eta <= 1:
                raise ValueError("eta must lie in (0, 1]")
        elif self.eps_R < 0:
            raise ValueError("eps_R must be nonnegative")

    @property
    def ratio(self) -> float:
        return self.eps_R if self.eps_R is not None else self.eps_A / self.eta


def perturbation_bound(inputs: BoundInputs) -> float:
    """``(1 + e)^(2n) - 1`` where ``e`` is the ratio distance or ``eps_A / eta``."""
    e = inputs.ratio
    if math.isinf(e):
        return math.inf
    return math.expm1(2 * inputs.n * math.log1p(e))


def beta_threshold(eta: float, eps: float, n: int) -> float:
    """Largest absolute perturbation under which optimal pure memoryless strategies stay eps-optimal."""
    if not 0 < eta <= 1:
        raise ValueError("eta must lie in (0, 1]")
    if eps <= 0:
        raise ValueError("eps must be positive")
    if n < 1:
        raise ValueError("n must be at least 1")
    return 0.5 * eta * math.expm1(math.log1p(eps / 2) / (2 * n))


# --- perturbation -----------------------------------------------------------


class PerturbationTooLarge(ValueError):
    pass


def _shift_rng(seed: int, stream: Sequence[int], key: Sequence[int]) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, stream), *map(int, key)]))


def perturb(G: Structure, eps: float, seed: int, stream: Sequence[int] = ()) -> GameStructure:
    """Structurally equivalent perturbation with ``dist_A <= eps``.

    Each support entry draws a shift in ``[-eps, eps]`` from a generator keyed
    by (seed, stream, state, move pair, target).  Shifts are centred so the
    distribution still sums to one, then scaled so no entry moves by more
    than ``eps`` or drops below ``eta / 2``.
    """
    G = as_game(G)
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    eta = min_positive_probability(G)
    if eps > 0 and eps >= eta:
        raise PerturbationTooLarge(f"eps={eps} must be below the least positive probability {eta}")
    delta = {}
    for si, s in enumerate(G.states):
        T = G.tensors[si]
        for ai, a in enumerate(G.gamma1[s]):
            for bi, b in enumerate(G.gamma2[s]):
                p = T[ai, bi]
                supp = np.flatnonzero(p > SUPPORT_EPS)
                q = p.copy()
                if eps > 0 and supp.size > 1:
                    u = np.array(
                        [_shift_rng(seed, stream, (si, ai, bi, t)).uniform(-eps, eps) for t in supp]
                    )
                    d = u - u.mean()
                    big = np.abs(d).max()
                    if big > 0:
                        c = min(1.0, eps / big)
                        neg = d < 0
                        if neg.any():
                            c = min(c, float(np.min((p[supp][neg] - eta / 2) / -d[neg])))
                        # the tiny shrink keeps both caps valid after rounding
                        q[supp] = p[supp] + c * (1.0 - 1e-12) * d
                delta[(s, a, b)] = {G.states[t]: float(q[t]) for t in supp}
    return GameStructure(G.states, G.moves, G.gamma1, G.gamma2, delta)


# --- solving by kind --------------------------------------------------------


def solve_values(G: Structure, objective: Objective) -> tuple[np.ndarray, float]:
    """Player-1 values with the matching solver, plus its documented tolerance."""
    kind = classify(G)
    parity = isinstance(objective, ParityObjective)
    if kind is StructureKind.MARKOV_CHAIN:
        v = parity_value_mc(G, objective) if parity else multidiscounted_value_fixed_point(G, objective)
        return v, EXACT_TOL
    if kind in (StructureKind.MDP_PLAYER1, StructureKind.MDP_PLAYER2):
        if parity:
            return parity_value_mdp(G, objective).values, EXACT_TOL
        return multidiscounted_value_mdp(G, objective, ITERATIVE_TOL).values, ITERATIVE_TOL
    if parity:
        if kind is StructureKind.CONCURRENT:
            raise StructureError("exact concurrent parity values are out of scope; use the approximation")
        return parity_value_turnbased(G, objective).values, EXACT_TOL
    return multidiscounted_value_concurrent(G, objective, ITERATIVE_TOL).values, ITERATIVE_TOL


# --- certificates -----------------------------------------------------------


@dataclass
class CertificateReport:
    diffs: dict[str, float]
    bound: float
    margin: float
    holds: bool
    structurally_equivalent: bool
    dist_A: float
    dist_R: float
    abs_bound: float
    meta: dict = field(default_factory=dict)

    @property
    def max_diff(self) -> float:
        return max(self.diffs.values()) if self.diffs else 0.0

    def to_dict(self) -> dict:
        return {
            "abs_bound": self.abs_bound,
            "bound": self.bound,
            "diffs": dict(self.diffs),
            "dist_A": self.dist_A,
            "dist_R": self.dist_R,
            "holds": self.holds,
            "margin": self.margin,
            "max_diff": self.max_diff,
            "meta": self.meta,
            "structurally_equivalent": self.structurally_equivalent,
        }


def _objective_name(objective: Objective) -> str:
    return "parity" if isinstance(objective, ParityObjective) else "multidiscounted"


def certify_value_bound(G1: Structure, G2: Structure, objective: Objective) -> CertificateReport:
    """Compare per-state value differences with the ratio-distance bound.

    Structurally inequivalent pairs are reported with an infinite ratio
    distance and ``holds = False``: no bound applies to them.
    """
    G1, G2 = as_game(G1), as_game(G2)
    if classify(G1) is not classify(G2):
        raise StructureError("the two structures are of different kinds")
    v1, t1 = solve_values(G1, objective)
    v2, t2 = solve_values(G2, objective)
    diffs = {s: float(abs(a - b)) for s, a, b in zip(G1.states, v1, v2)}
    tol = t1 + t2
    dist_A = absolute_distance(G1, G2)
    eta = min_positive_probability(G1)
    abs_bound = perturbation_bound(BoundInputs(G1.n, eps_A=dist_A, eta=eta))
    meta = {"objective": _objective_name(objective), "tolerance": tol, "eta": eta, "n": G1.n}
    if not structurally_equivalent(G1, G2):
        meta["note"] = "supports differ; no bound applies"
        return CertificateReport(diffs, math.inf, -math.inf, False, False, dist_A, math.inf, math.inf, meta)
    dist_R = ratio_distance(G1, G2)
    bound = perturbation_bound(BoundInputs(G1.n, eps_R=dist_R))
    margin = bound - max(diffs.values())
    return CertificateReport(diffs, bound, margin, margin >= -tol, True, dist_A, dist_R, abs_bound, meta)


def optimal_strategy_p1(G: Structure, p: ParityObjective) -> MemorylessStrategy:
    kind = classify(G)
    if kind in (StructureKind.MDP_PLAYER1, StructureKind.MDP_PLAYER2, StructureKind.MARKOV_CHAIN):
        res = parity_value_mdp(G, p)
        if res.strategy.owner == 1:
            return res.strategy
        G = as_game(G)
        return MemorylessStrategy.pure(1, {s: G.gamma1[s][0] for s in G.states})
    if kind is StructureKind.TURN_BASED:
        return parity_value_turnbased(G, p).strategy1
    raise StructureError(f"strategy robustness needs an MDP or turn-based game, got {kind.value}")


def certify_strategy_robustness(G1: Structure, G2: Structure, p: ParityObjective, eps: float) -> CertificateReport:
    """Check that an optimal pure memoryless strategy of ``G1`` is ``eps``-optimal in ``G2``.

    ``diffs`` holds the per-state suboptimality ``Val(G2) - Val^pi(G2)``; the
    report's ``bound`` is ``eps``.  ``meta['hypothesis_met']`` tells whether
    the absolute distance is within the beta threshold.
    """
    G1, G2 = as_game(G1), as_game(G2)
    if not structurally_equivalent(G1, G2):
        raise NotStructurallyEquivalent("strategy robustness needs structurally equivalent structures")
    pi1 = optimal_strategy_p1(G1, p)
    v2, t2 = solve_values(G2, p)
    guaranteed = parity_value_mdp(restrict_player1(G2, pi1), p).values
    diffs = {s: float(max(0.0, a - b)) for s, a, b in zip(G2.states, v2, guaranteed)}
    tol = t2 + EXACT_TOL
    dist_A = absolute_distance(G1, G2)
    dist_R = ratio_distance(G1, G2)
    eta = min_positive_probability(G1)
    beta = beta_threshold(eta, eps, G1.n)
    margin = eps - max(diffs.values())
    meta = {
        "objective": "parity",
        "tolerance": tol,
        "eps": eps,
        "beta": beta,
        "eta": eta,
        "hypothesis_met": dist_A <= beta,
        "strategy": pi1.as_choices(),
    }
    return CertificateReport(
        diffs,
        eps,
        margin,
        margin >= -tol,
        True,
        dist_A,
        dist_R,
        perturbation_bound(BoundInputs(G1.n, eps_A=dist_A, eta=eta)),
        meta,
    )


# --- continuity sweep -------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    eps: float
    sample: int
    sup_diff: float
    bound: float
    dist_R: float


def continuity_sweep(
    G: Structure, objective: Objective, epsilons: Sequence[float], samples: int, seed: int
) -> list[SweepRow]:
    """Perturb, solve and compare, for every (eps, sample) cell; rows by eps descending.

    Sample ``j`` uses the same random stream at every ``eps`` so rows for a
    fixed sample differ only in magnitude.
    """
    G = as_game(G)
    v0, _ = solve_values(G, objective)
    rows = []
    for eps in sorted({float(e) for e in epsilons}, reverse=True):
        for j in range(samples):
            H = perturb(G, eps, seed, stream=(j,))
            v1, _ = solve_values(H, objective)
            dR = ratio_distance(G, H)
            rows.append(
                SweepRow(eps, j, float(np.max(np.abs(v1 - v0))), perturbation_bound(BoundInputs(G.n, eps_R=dR)), dR)
            )
    return rows


__all__ = [
    "BoundInputs",
    "perturbation_bound",
    "beta_threshold",
    "perturb",
    "PerturbationTooLarge",
    "solve_values",
    "CertificateReport",
    "certify_value_bound",
    "certify_strategy_robustness",
    "optimal_strategy_p1",
    "SweepRow",
    "continuity_sweep",
]
