import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from conftest import random_chain
from robustparity.benchlab import example2_exact_value, example2_line, example2_parity
from robustparity.chain_solver import (
    ExitQueryError,
    augmented_chain,
    bscc_decomposition,
    discounted_values_stable,
    exit_distribution,
    mean_discounted_time,
    mt_via_exit,
    multidiscounted_value_fixed_point,
    multidiscounted_value_mc,
    parity_value_mc,
    reachability_values,
)
from robustparity.game_core import DiscountSpec, MarkovChain, ParityObjective


def uniform_spec(states, lam, reward=0.0):
    return DiscountSpec({s: lam for s in states}, {s: reward for s in states})


def test_bscc_of_absorbing_pair():
    M = MarkovChain(("a", "b", "c"), [[0.5, 0.25, 0.25], [0, 1, 0], [0, 0, 1]])
    bottoms, transient = bscc_decomposition(M)
    assert bottoms == [["b"], ["c"]]
    assert transient == ["a"]


def test_reachability_and_parity():
    M = MarkovChain(("a", "b", "c"), [[0.5, 0.25, 0.25], [0, 1, 0], [0, 0, 1]])
    np.testing.assert_allclose(reachability_values(M, ["b"]), [0.5, 1, 0])
    v = parity_value_mc(M, ParityObjective({"a": 0, "b": 2, "c": 1}))
    np.testing.assert_allclose(v, [0.5, 1, 0])


def test_line_walk_matches_gamblers_ruin():
    for n, eps in [(1, 0.1), (3, 0.0), (5, 1e-4), (4, 0.3)]:
        M, target = example2_line(n, eps)
        v = reachability_values(M, target)
        assert v[n] == pytest.approx(example2_exact_value(n, eps), abs=1e-12)
        assert parity_value_mc(M, example2_parity(n))[n] == pytest.approx(v[n], abs=1e-14)


def test_mean_discounted_time_single_edge():
    M = MarkovChain(("s", "t"), [[0, 1], [0, 1]])
    spec = uniform_spec(M.states, 1 / 3)
    MT = mean_discounted_time(M, spec)
    assert MT[0, 1] == pytest.approx(1 / 3, abs=1e-12)
    assert mt_via_exit(M, spec, "s")["t"] == pytest.approx(1 / 3, abs=1e-12)
    aug = augmented_chain(M, spec)
    assert exit_distribution(aug, M.states, "s") == pytest.approx({"s'": 2 / 3, "t'": 1 / 3}, abs=1e-12)


def test_mean_discounted_time_alternation():
    M = MarkovChain(("s", "t"), [[0, 1], [1, 0]])
    spec = uniform_spec(M.states, 1 / 3)
    assert mean_discounted_time(M, spec)[0, 1] == pytest.approx(0.25, abs=1e-12)
    fw = mt_via_exit(M, spec, "s", method="freidlin-wentzell")
    assert fw["t"] == pytest.approx(0.25, abs=1e-12)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mt_rows_sum_to_one_and_match_exit(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 7))
    M = random_chain(rng, n)
    spec = DiscountSpec(
        {s: float(rng.uniform(0.1, 0.9)) for s in M.states}, {s: float(rng.random()) for s in M.states}
    )
    MT = mean_discounted_time(M, spec)
    np.testing.assert_allclose(MT.sum(axis=1), 1.0, atol=1e-9)
    s0 = M.states[0]
    via = mt_via_exit(M, spec, s0)
    np.testing.assert_allclose([via[s] for s in M.states], MT[0], atol=1e-9)
    np.testing.assert_allclose(multidiscounted_value_mc(M, spec), multidiscounted_value_fixed_point(M, spec), atol=1e-12)


def test_exit_formula_counterexample_for_cyclic_terms():
    # a -> b or exit t; b -> b or exit u.  Exit through t from a has probability 1/2.
    M = MarkovChain.from_rows(
        ("a", "b", "t", "u"),
        {"a": {"b": 0.5, "t": 0.5}, "b": {"b": 0.5, "u": 0.5}, "t": {"t": 1}, "u": {"u": 1}},
    )
    fw = exit_distribution(M, ["a", "b"], "a", method="freidlin-wentzell")
    assert fw["t"] == pytest.approx(0.5, abs=1e-15)
    assert fw["u"] == pytest.approx(0.5, abs=1e-15)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_exit_methods_agree(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7))
    M = random_chain(rng, n)
    c = int(rng.integers(1, min(5, n - 1) + 1))
    C = list(rng.choice(M.states, size=c, replace=False))
    try:
        lin = exit_distribution(M, C, C[0])
    except ExitQueryError:
        return
    fw = exit_distribution(M, C, C[0], method="freidlin-wentzell")
    for t in lin:
        assert fw[t] == pytest.approx(lin[t], abs=1e-9)


def test_exit_query_errors():
    M = MarkovChain(("a", "b"), [[1, 0], [0, 1]])
    with pytest.raises(ExitQueryError):
        exit_distribution(M, ["a"], "a")  # cannot leave
    with pytest.raises(ExitQueryError):
        exit_distribution(M, ["a", "b"], "a")  # not a proper subset
    with pytest.raises(ExitQueryError):
        exit_distribution(M, ["a"], "b")


def test_stable_evaluator_matches_lu(rng):
    for _ in range(30):
        n = int(rng.integers(1, 8))
        P = random_chain(rng, n).P
        mu = 10 ** rng.uniform(-6, -0.1, n)
        r = rng.random(n)
        ref = scipy.linalg.solve(np.eye(n) - (1 - mu)[:, None] * P, mu * r)
        np.testing.assert_allclose(discounted_values_stable(P, mu, r), ref, atol=1e-9)


def test_stable_evaluator_at_extreme_discounts():
    # two absorbing states reached from s with 1/4 and 3/4; tiny mu must not matter
    P = np.array([[0, 0.25, 0.75], [0, 1, 0], [0, 0, 1.0]])
    mu = np.array([1e-30, 1e-30, 1e-30])
    v = discounted_values_stable(P, mu, np.array([0, 1.0, 0]))
    np.testing.assert_allclose(v, [0.25, 1, 0], atol=1e-15)


def test_lambda_cap():
    M = MarkovChain(("a",), [[1.0]])
    with pytest.raises(ValueError):
        mean_discounted_time(M, uniform_spec(M.states, 1 - 1e-8))
