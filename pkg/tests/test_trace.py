import random
from fractions import Fraction

import numpy as np
import pytest

from metachain import errors
from metachain.chain import stationary_measure
from metachain.scale import ZERO, compare, Comparison, evaluate, sq
from metachain.trace import (average_rate, eliminate_state, hitting_limit,
                             trace_chain_of, trace_onto)

from conftest import (numeric_hitting, random_reversible_chain, rate_matrix)


def _base(chain):
    return trace_chain_of(chain, stationary_measure(chain))


def test_eliminate_middle_state_w3(w3):
    t = eliminate_state(_base(w3), "2")
    assert t.rate("1", "3") == sq("1/2", 2)
    assert t.rate("3", "1") == sq("1/2", 2)
    assert t.kept == ("1", "3")


def test_eliminate_unrelated_state_keeps_rate():
    edges = {("a", "b"): sq(1, 1), ("b", "a"): sq(1, 0),
             ("b", "c"): sq(1, 0), ("c", "b"): sq(1, 1),
             ("c", "d"): sq(1, 2), ("d", "c"): sq(1, 0)}
    from metachain.chain import build_chain
    chain = build_chain(["a", "b", "c", "d"], edges)
    t = eliminate_state(_base(chain), "d")
    assert t.rate("a", "b") == sq(1, 1)
    assert t.rate("b", "c") == sq(1, 0)


def test_elimination_order_irrelevant_w5(w5):
    base = _base(w5)
    one = eliminate_state(eliminate_state(base, "2"), "4")
    two = eliminate_state(eliminate_state(base, "4"), "2")
    assert one.rates == two.rates


def test_eliminate_errors(w3):
    base = _base(w3)
    with pytest.raises(errors.StateNotKept):
        eliminate_state(base, "9")
    t = eliminate_state(base, "2")
    with pytest.raises(errors.TooFewStates):
        eliminate_state(t, "1")


def test_trace_onto_w5(w5):
    t = trace_onto(w5, {"1", "3", "5"})
    assert t.rate("1", "3") == sq("1/2", 1)
    assert t.rate("3", "1") == sq("1/2", 2)
    assert t.rate("3", "5") == sq("1/2", 2)
    # detailed balance forces (1/2, 4) here
    assert t.rate("5", "3") == sq("1/2", 4)
    assert t.rate("1", "5") is ZERO
    # trace reversibility against the restricted measure
    for x in t.kept:
        for y in t.kept:
            if x != y:
                assert t.mu[x] * t.rate(x, y) == t.mu[y] * t.rate(y, x)


def test_trace_onto_errors(w5):
    with pytest.raises(errors.EmptySubset):
        trace_onto(w5, set())
    with pytest.raises(errors.FullSet):
        trace_onto(w5, set(w5.states))
    assert trace_onto(w5, {"1", "2", "3", "5"}).rates == \
        eliminate_state(_base(w5), "4").rates


def test_trace_symmetric_cycle_stays_symmetric():
    from metachain.chain import build_chain
    edges = {}
    for a, b in [("a", "b"), ("b", "c"), ("c", "a")]:
        edges[(a, b)] = sq(1, 0)
        edges[(b, a)] = sq(1, 0)
    chain = build_chain(["a", "b", "c"], edges)
    t = trace_onto(chain, {"a", "c"})
    assert t.rate("a", "c") == t.rate("c", "a")


def test_elimination_order_invariance_random(rng):
    for _ in range(15):
        chain = random_reversible_chain(rng, 8)
        keep = set(rng.sample(chain.states, 3))
        asc = trace_onto(chain, keep)
        desc = trace_onto(chain, keep, order="descending")
        assert asc.rates == desc.rates


def test_trace_monotone_under_smaller_kept_set(rng):
    for _ in range(10):
        chain = random_reversible_chain(rng, 7)
        big = set(rng.sample(chain.states, 5))
        small = set(rng.sample(sorted(big), 3))
        tb = trace_onto(chain, big)
        ts = trace_onto(chain, small)
        for x in small:
            for y in small:
                if x == y:
                    continue
                rel = compare(ts.rate(x, y), tb.rate(x, y))
                assert rel in (Comparison.SUCC, Comparison.ASYMP_EQUIV) or \
                    (ts.rate(x, y) is ZERO and tb.rate(x, y) is ZERO)


def test_trace_matches_numeric_schur(rng):
    eps = 1e-2
    for _ in range(8):
        chain = random_reversible_chain(rng, 6)
        keep = sorted(rng.sample(chain.states, 3))
        t = trace_onto(chain, set(keep))
        Q = rate_matrix(chain, eps)
        kept_idx = [chain.index[s] for s in keep]
        gone_idx = [chain.index[s] for s in chain.states if s not in keep]
        A = Q[np.ix_(kept_idx, kept_idx)]
        B = Q[np.ix_(kept_idx, gone_idx)]
        C = Q[np.ix_(gone_idx, kept_idx)]
        D = Q[np.ix_(gone_idx, gone_idx)]
        schur = A - B @ np.linalg.solve(D, C)
        for i, x in enumerate(keep):
            for j, y in enumerate(keep):
                if i == j:
                    continue
                exact = t.rate(x, y)
                if exact is ZERO:
                    assert abs(schur[i, j]) < 1e-9
                else:
                    # leading order only; residual shrinks with eps
                    assert abs(schur[i, j] / evaluate(exact, eps) - 1) < 0.2


def test_average_rate_w3(w3):
    t = trace_onto(w3, {"1", "3"})
    assert average_rate(t, {"1"}, {"3"}) == sq("1/2", 2)
    with pytest.raises(errors.OverlappingSets):
        average_rate(t, {"1"}, {"1", "3"})


def test_average_rate_detailed_balance(rng):
    for _ in range(10):
        chain = random_reversible_chain(rng, 7)
        keep = sorted(rng.sample(chain.states, 4))
        t = trace_onto(chain, set(keep))
        A, B = {keep[0], keep[1]}, {keep[2], keep[3]}
        rab = average_rate(t, A, B)
        rba = average_rate(t, B, A)
        mu_a = t.mu[keep[0]] + t.mu[keep[1]]
        mu_b = t.mu[keep[2]] + t.mu[keep[3]]
        if rab is ZERO:
            assert rba is ZERO
        else:
            assert rab * mu_a == rba * mu_b


def test_average_rate_disconnected_sets_gives_zero():
    from metachain.chain import build_chain
    edges = {("a", "b"): sq(1, 1), ("b", "a"): sq(1, 0),
             ("b", "c"): sq(1, 1), ("c", "b"): sq(1, 0)}
    chain = build_chain(["a", "b", "c"], edges)
    t = trace_chain_of(chain, stationary_measure(chain))
    assert average_rate(t, {"a"}, {"c"}) is ZERO


def test_hitting_limit_w3(w3):
    f = hitting_limit(w3, {"1"}, {"3"})
    assert f["2"] == Fraction(1, 2)
    assert f["1"] == 1 and f["3"] == 0


def test_hitting_limit_w5(w5):
    f = hitting_limit(w5, {"3"}, {"5"})
    assert f["4"] == Fraction(1, 2)
    assert f["2"] == 1
    assert f["1"] == 1


def test_hitting_limit_matches_numeric(w3, w5):
    eps = 1e-3
    for chain, A, B in [(w3, {"1"}, {"3"}), (w5, {"3"}, {"5"}),
                        (w5, {"1"}, {"3", "5"})]:
        f = hitting_limit(chain, A, B)
        h = numeric_hitting(chain, A, B, eps)
        for s in chain.states:
            assert abs(h[chain.index[s]] - float(f[s])) < 0.01


def test_hitting_limit_partition_sums_to_one(rng):
    for _ in range(10):
        chain = random_reversible_chain(rng, 7)
        states = list(chain.states)
        targets = rng.sample(states, 3)
        t1, t2, t3 = ({t} for t in targets)
        rest = [s for s in states if s not in targets]
        fs = [hitting_limit(chain, a, set(targets) - a)
              for a in ({targets[0]}, {targets[1]}, {targets[2]})]
        for s in rest:
            total = sum(f[s] for f in fs)
            assert total == 1
            assert all(0 <= f[s] <= 1 for f in fs)
