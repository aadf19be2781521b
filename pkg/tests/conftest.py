import random
from fractions import Fraction

import numpy as np
import pytest

from metachain import chain as chain_mod
from metachain.scale import ScaledQuantity, sq


def w3_edges():
    return {
        ("1", "2"): sq(1, 2), ("2", "1"): sq(1, 0),
        ("2", "3"): sq(1, 0), ("3", "2"): sq(1, 2),
    }


def w5_edges():
    return {
        ("1", "2"): sq(1, 1), ("2", "1"): sq(1, 0),
        ("2", "3"): sq(1, 0), ("3", "2"): sq(1, 2),
        ("3", "4"): sq(1, 2), ("4", "3"): sq(1, 0),
        ("4", "5"): sq(1, 0), ("5", "4"): sq(1, 4),
    }


@pytest.fixture
def w3():
    return chain_mod.build_chain(["1", "2", "3"], w3_edges())


@pytest.fixture
def w5():
    return chain_mod.build_chain(["1", "2", "3", "4", "5"], w5_edges())


def random_reversible_chain(rng, n_states, orders=(0, 1, 2, 3), coeffs=(1, 2, 3),
                            extra_edge_prob=0.4):
    """Random reversible chain built from a random potential.

    States get random measure monomials, undirected edges random conductance
    monomials; rates R(x, y) = g(x, y) / mu(x) are reversible by
    construction.  All rate orders are shifted so the fastest rate has order
    zero, which is a pure change of time unit.
    """
    states = [str(i) for i in range(n_states)]
    mu = {s: ScaledQuantity(Fraction(rng.choice(coeffs)),
                            Fraction(rng.choice(orders)))
          for s in states}
    undirected = set()
    shuffled = states[:]
    rng.shuffle(shuffled)
    for i in range(1, n_states):
        j = rng.randrange(i)
        undirected.add((min(shuffled[i], shuffled[j], key=int),
                        max(shuffled[i], shuffled[j], key=int)))
    for i in range(n_states):
        for j in range(i + 1, n_states):
            if rng.random() < extra_edge_prob:
                undirected.add((states[i], states[j]))

    raw = {}
    min_order = None
    for x, y in undirected:
        g = ScaledQuantity(Fraction(rng.choice(coeffs)),
                           Fraction(rng.choice(orders)) + max(mu[x].order, mu[y].order))
        raw[(x, y)] = g / mu[x]
        raw[(y, x)] = g / mu[y]
        for key in ((x, y), (y, x)):
            if min_order is None or raw[key].order < min_order:
                min_order = raw[key].order
    shift = ScaledQuantity(Fraction(1), -min_order)
    edges = {k: r * shift for k, r in raw.items()}
    return chain_mod.build_chain(states, edges)


@pytest.fixture
def rng():
    return random.Random(20240817)


def rate_matrix(chain, eps):
    """Dense numeric generator at a concrete eps (rows sum to zero)."""
    n = chain.n_states()
    Q = np.zeros((n, n))
    for x in chain.states:
        i = chain.index[x]
        for y, r in chain.out_edges(x).items():
            Q[i, chain.index[y]] = float(r.coeff) * eps ** float(r.order)
    np.fill_diagonal(Q, -Q.sum(axis=1))
    return Q


def numeric_stationary(chain, eps):
    Q = rate_matrix(chain, eps)
    n = Q.shape[0]
    A = np.vstack([Q.T, np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    return pi


def numeric_hitting(chain, A_set, B_set, eps):
    """P_x[T_A < T_B] for all states by a linear solve."""
    Q = rate_matrix(chain, eps)
    n = Q.shape[0]
    h = np.zeros(n)
    interior = [i for i, s in enumerate(chain.states)
                if s not in A_set and s not in B_set]
    for s in A_set:
        h[chain.index[s]] = 1.0
    if interior:
        M = Q[np.ix_(interior, interior)]
        rhs = -sum(Q[np.ix_(interior, [chain.index[s]])].ravel()
                   for s in A_set)
        sol = np.linalg.solve(M, rhs)
        for k, i in enumerate(interior):
            h[i] = sol[k]
    return h


def numeric_mean_exit(chain, start, target_set, eps):
    """E_start[T_target] by a linear solve."""
    Q = rate_matrix(chain, eps)
    interior = [i for i, s in enumerate(chain.states) if s not in target_set]
    M = Q[np.ix_(interior, interior)]
    sol = np.linalg.solve(M, -np.ones(len(interior)))
    return sol[interior.index(chain.index[start])]


def reversible_weights(chain, eps):
    """Float stationary weights anchored at the first state, by the
    detailed-balance product along a spanning tree (well conditioned at any
    eps, unlike a least-squares solve of pi Q = 0)."""
    ref = chain.states[0]
    w = {ref: 1.0}
    queue = [ref]
    while queue:
        x = queue.pop(0)
        for y, rxy in chain.out_edges(x).items():
            if y in w:
                continue
            ryx = chain.rates[y][x]
            w[y] = w[x] * (float(rxy.coeff) * eps ** float(rxy.order)) / \
                (float(ryx.coeff) * eps ** float(ryx.order))
            queue.append(y)
    return w


def numeric_capacity(chain, A_set, B_set, eps):
    """Dirichlet form of the numeric equilibrium potential, anchored weights."""
    w = reversible_weights(chain, eps)
    h = numeric_hitting(chain, A_set, B_set, eps)
    cap = 0.0
    for x in chain.states:
        i = chain.index[x]
        for y, r in chain.out_edges(x).items():
            j = chain.index[y]
            if i < j:
                g = w[x] * float(r.coeff) * eps ** float(r.order)
                cap += g * (h[i] - h[j]) ** 2
    return cap
