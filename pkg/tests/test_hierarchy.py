import random
from fractions import Fraction

import pytest

from metachain import errors
from metachain.chain import build_chain, conductances, stationary_measure
from metachain.hierarchy import (full_hierarchy, level1_leaves, level_depths,
                                 level_rates, next_level)
from metachain.scale import Comparison, compare, evaluate, sq
from metachain.trace import average_rate, trace_onto

from conftest import numeric_hitting, numeric_mean_exit, random_reversible_chain


def test_level1_leaves_w5(w5):
    mu = stationary_measure(w5)
    leaves, delta = level1_leaves(w5, mu)
    assert leaves == [("1",), ("3",), ("5",)]
    assert delta == ("2", "4")


def test_level1_single_leaf_two_state():
    chain = build_chain(["1", "2"], {("1", "2"): sq(1, 1), ("2", "1"): sq(1, 0)})
    mu = stationary_measure(chain)
    leaves, delta = level1_leaves(chain, mu)
    assert leaves == [("1",)]
    assert delta == ("2",)
    report = full_hierarchy(chain)
    assert report.depth_count == 0
    assert report.note is not None


def test_level1_all_order_zero_is_trivial():
    edges = {}
    for a, b in [("a", "b"), ("b", "c")]:
        edges[(a, b)] = sq(1, 0)
        edges[(b, a)] = sq(1, 0)
    chain = build_chain(["a", "b", "c"], edges)
    mu = stationary_measure(chain)
    leaves, delta = level1_leaves(chain, mu)
    assert leaves == [("a", "b", "c")]
    assert delta == ()


def test_level_depths_w5(w5):
    mu = stationary_measure(w5)
    cond = conductances(w5, mu)
    metastates = [("1",), ("3",), ("5",)]
    depths, theta, active, lam = level_depths(w5, mu, cond, metastates)
    assert depths[0] == sq(2, -1)
    assert depths[1] == sq(1, -2)
    assert depths[2] == sq(2, -4)
    assert theta == sq(2, -1)
    assert active == {0}
    assert lam == {0: Fraction(1), 1: Fraction(0), 2: Fraction(0)}


def test_level_depths_w3_symmetric(w3):
    mu = stationary_measure(w3)
    cond = conductances(w3, mu)
    metastates = [("1",), ("3",)]
    depths, theta, active, lam = level_depths(w3, mu, cond, metastates)
    # the chain is symmetric under 1 <-> 3, so both wells share the depth
    assert depths[0] == depths[1] == sq(2, -2)
    assert theta == sq(2, -2)
    assert active == {0, 1}
    assert lam == {0: Fraction(1), 1: Fraction(1)}


def test_level_rates_w5(w5):
    mu = stationary_measure(w5)
    cond = conductances(w5, mu)
    metastates = [("1",), ("3",), ("5",)]
    depths, theta, active, lam = level_depths(w5, mu, cond, metastates)
    hit, rates = level_rates(w5, metastates, active, lam, theta, mu, cond)
    assert hit[(0, 1)] == 1 and hit[(0, 2)] == 0
    assert rates[(0, 1)] == 1 and rates[(0, 2)] == 0
    # informational rows for the deeper wells
    assert hit[(1, 0)] == Fraction(1, 2) and hit[(1, 2)] == Fraction(1, 2)
    assert rates[(1, 0)] == 0


def test_next_level_w5(w5):
    metastates = [("1",), ("3",), ("5",)]
    rates = {(0, 1): Fraction(1), (0, 2): Fraction(0)}
    groups, parents, delta_inc, classes = next_level(metastates, rates)
    assert groups == [("3",), ("5",)]
    assert delta_inc == ("1",)
    assert parents == [(1,), (2,)]


def test_next_level_merges_symmetric_wells():
    metastates = [("1",), ("3",)]
    rates = {(0, 1): Fraction(1), (1, 0): Fraction(1)}
    groups, parents, delta_inc, classes = next_level(metastates, rates)
    assert groups == [("1", "3")]
    assert delta_inc == ()


def test_full_hierarchy_w5(w5):
    report = full_hierarchy(w5)
    assert report.depth_count == 2
    lvl1, lvl2 = report.levels
    assert lvl1.theta == sq(2, -1)
    assert lvl1.metastates == [("1",), ("3",), ("5",)]
    assert lvl1.limit_rates[(0, 1)] == 1
    assert lvl2.theta == sq(2, -2)
    assert lvl2.metastates == [("3",), ("5",)]
    assert lvl2.limit_rates[(0, 1)] == 1
    assert lvl2.delta == ("1", "2", "4")
    assert report.terminal == [["5"]]


def test_full_hierarchy_w3(w3):
    report = full_hierarchy(w3)
    assert report.depth_count == 1
    lvl = report.levels[0]
    assert lvl.theta == sq(2, -2)
    assert lvl.limit_rates[(0, 1)] == 1
    assert lvl.limit_rates[(1, 0)] == 1
    assert sorted(report.terminal[0]) == ["1", "3"]


def test_full_hierarchy_numeric_oracles_w5(w5):
    eps = 1e-3
    # level-1 mean exit from the shallow well
    mean = numeric_mean_exit(w5, "1", {"3", "5"}, eps)
    assert abs(mean / (2 / eps) - 1) < 0.05
    # level-2 mean exit
    mean2 = numeric_mean_exit(w5, "3", {"5"}, eps)
    assert abs(mean2 / (2 / eps ** 2) - 1) < 0.05
    # absorption split from the deep well
    h = numeric_hitting(w5, {"1"}, {"5"}, eps)
    assert abs(h[w5.index["3"]] - 0.5) < 0.05


def test_eq18_bound_on_levels(w5):
    mu = stationary_measure(w5)
    report = full_hierarchy(w5)
    for level in report.levels:
        union = {s for g in level.metastates for s in g}
        t = trace_onto(w5, union, mu)
        for i, group in enumerate(level.metastates):
            others = union - set(group)
            r = average_rate(t, set(group), others)
            scaled = level.theta * r
            assert scaled.order >= 0


def test_random_chain_hierarchies_consistent(rng):
    """Invariants (P1)-(P3), rate signs and the two-route identity on random chains."""
    produced = 0
    attempts = 0
    while produced < 25 and attempts < 200:
        attempts += 1
        chain = random_reversible_chain(rng, rng.randint(4, 9),
                                        orders=(0, 1, 1, 2, 3))
        report = full_hierarchy(chain)  # internal cross-checks run here
        if report.depth_count == 0:
            continue
        produced += 1
        mu = stationary_measure(chain)
        prev_nu = None
        prev_theta = None
        for level in report.levels:
            nu = len(level.metastates)
            if prev_nu is not None:
                assert 1 < nu < prev_nu
            prev_nu = nu
            if prev_theta is not None:
                assert compare(level.theta, prev_theta) is Comparison.SUCC
            prev_theta = level.theta
            # partition of the state space
            seen = list(level.delta)
            for g in level.metastates:
                seen.extend(g)
            assert sorted(seen) == sorted(chain.states)
            # measure equivalence inside metastates
            for g in level.metastates:
                base = mu.mu[g[0]]
                for s in g[1:]:
                    assert compare(mu.mu[s], base) is Comparison.ASYMP_EQUIV
            # rate sign pattern
            for i in range(nu):
                total = sum(level.limit_rates.get((i, j), Fraction(0))
                            for j in range(nu) if j != i)
                if i in level.active:
                    assert total > 0
                else:
                    assert total == 0
    assert produced >= 20


def test_refinement_across_levels(rng):
    for _ in range(10):
        chain = random_reversible_chain(rng, 8, orders=(0, 1, 2, 3))
        report = full_hierarchy(chain)
        for prev, nxt in zip(report.levels, report.levels[1:]):
            prev_sets = {g: i for i, g in enumerate(prev.metastates)}
            for i, g in enumerate(nxt.metastates):
                members = nxt.parent_map[i]
                union = sorted(s for m in members for s in prev.metastates[m])
                assert tuple(union) == tuple(sorted(g))
