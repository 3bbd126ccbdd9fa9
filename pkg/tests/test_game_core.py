import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from robustparity.benchlab import example1_family, random_instance, ratio_example_chains
from robustparity.game_core import (
    DiscountSpec,
    GameStructure,
    MarkovChain,
    MemorylessStrategy,
    NotStructurallyEquivalent,
    ParityObjective,
    ShapeMismatch,
    StructureError,
    StructureKind,
    absolute_distance,
    classify,
    distance_report,
    min_positive_probability,
    ratio_distance,
    restrict_player1,
    restrict_player2,
    structurally_equivalent,
    turn_view,
    validate_structure,
)


def tiny_game():
    S = ("x", "y")
    return GameStructure(
        S,
        ("a", "b"),
        {"x": ("a", "b"), "y": ("a",)},
        {"x": ("a", "b"), "y": ("a",)},
        {
            ("x", "a", "a"): {"x": 0.5, "y": 0.5},
            ("x", "a", "b"): {"y": 1.0},
            ("x", "b", "a"): {"x": 1.0},
            ("x", "b", "b"): {"x": 0.25, "y": 0.75},
            ("y", "a", "a"): {"y": 1.0},
        },
    )


def test_classify_kinds():
    assert classify(tiny_game()) is StructureKind.CONCURRENT
    for kind in StructureKind:
        n = 3 if kind is not StructureKind.TURN_BASED else 4
        assert classify(random_instance(kind, n, 2, seed=5)) is kind


def test_valid_structure_has_no_diagnostics():
    assert validate_structure(tiny_game()) == []


def test_diagnostics_name_the_rule():
    G = tiny_game()
    bad = dict(G.delta)
    bad[("x", "a", "a")] = {"x": 0.5, "y": 0.4}
    del bad[("x", "b", "b")]
    bad[("y", "a", "a")] = {"z": 1.0}
    H = GameStructure(G.states, G.moves, G.gamma1, G.gamma2, bad)
    rules = {d.rule for d in validate_structure(H)}
    assert {"distribution sum", "missing transition", "unknown state"} <= rules
    with pytest.raises(StructureError):
        H.check()


def test_empty_move_set_is_reported():
    G = GameStructure(("x",), ("a",), {"x": ()}, {"x": ("a",)}, {})
    assert any(d.rule == "empty move set" for d in validate_structure(G))


def test_distance_of_identical_structures_is_zero():
    G = tiny_game()
    assert absolute_distance(G, G) == 0.0
    assert ratio_distance(G, G) == 0.0
    assert structurally_equivalent(G, G)


def test_example1_distances():
    for eps in (0.1, 0.01):
        G1, G2, _ = example1_family(eps)
        assert absolute_distance(G1, G2) == pytest.approx(eps, abs=1e-15)
        assert not structurally_equivalent(G1, G2)
        with pytest.raises(NotStructurallyEquivalent):
            ratio_distance(G1, G2)
        assert math.isinf(distance_report(G1, G2).ratio)


def test_ratio_distance_is_not_a_metric():
    eps = 0.05
    G1, G2, G5 = ratio_example_chains(eps)
    d12, d25, d15 = ratio_distance(G1, G2), ratio_distance(G2, G5), ratio_distance(G1, G5)
    assert d12 == pytest.approx(1.0)
    assert d25 == pytest.approx(1.5)
    assert d15 == pytest.approx(4.0)
    assert d12 + d25 < d15
    assert absolute_distance(G1, G2) == pytest.approx(eps)


def test_shape_mismatch():
    a = MarkovChain(("p", "q"), [[1, 0], [0, 1]])
    b = MarkovChain(("p", "r"), [[1, 0], [0, 1]])
    with pytest.raises(ShapeMismatch):
        absolute_distance(a, b)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 5))
def test_ratio_absolute_relation(seed, n):
    rng = np.random.default_rng(seed)
    P = rng.random((n, n)) + 0.05
    P /= P.sum(axis=1, keepdims=True)
    Q = P * (1 + 0.1 * rng.uniform(-1, 1, P.shape))
    Q /= Q.sum(axis=1, keepdims=True)
    G1, G2 = MarkovChain(tuple(map(str, range(n))), P), MarkovChain(tuple(map(str, range(n))), Q)
    eta = min(min_positive_probability(G1), min_positive_probability(G2))
    assert ratio_distance(G1, G2) <= absolute_distance(G1, G2) / eta + 1e-12


def test_restriction_mixes_rows():
    G = tiny_game()
    pi = MemorylessStrategy(1, {"x": {"a": 0.5, "b": 0.5}, "y": {"a": 1.0}})
    H = restrict_player1(G, pi)
    assert classify(H) is StructureKind.MDP_PLAYER2
    np.testing.assert_allclose(H.distribution("x", "_", "a"), [0.75, 0.25])
    np.testing.assert_allclose(H.distribution("x", "_", "b"), [0.125, 0.875])
    both = restrict_player2(H, MemorylessStrategy.pure(2, {"x": "b", "y": "a"}))
    assert classify(both) is StructureKind.MARKOV_CHAIN


def test_restriction_does_not_increase_distances(rng):
    G = random_instance("concurrent", 4, 2, seed=3)
    from robustparity.robustness import perturb

    H = perturb(G, 0.02, seed=9)
    pi = MemorylessStrategy(1, {s: {m: 1 / len(G.gamma1[s]) for m in G.gamma1[s]} for s in G.states})
    assert absolute_distance(restrict_player1(G, pi), restrict_player1(H, pi)) <= absolute_distance(G, H) + 1e-15
    assert ratio_distance(restrict_player1(G, pi), restrict_player1(H, pi)) <= ratio_distance(G, H) + 1e-12


def test_turn_view_rejects_concurrent_states():
    with pytest.raises(StructureError):
        turn_view(tiny_game())


def test_objective_validation():
    with pytest.raises(ValueError):
        DiscountSpec({"x": 1.0}, {"x": 0.5})
    with pytest.raises(ValueError):
        DiscountSpec({"x": 0.5}, {"x": 1.5})
    with pytest.raises(ValueError):
        ParityObjective({"x": -1})
    assert ParityObjective({"x": 1}).shifted().priority == {"x": 2}


def test_chain_round_trip_through_game_form():
    M = MarkovChain(("a", "b"), [[0.25, 0.75], [0.0, 1.0]])
    from robustparity.game_core import as_chain

    assert as_chain(M.to_game()) == M
