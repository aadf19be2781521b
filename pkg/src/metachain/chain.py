"""Chain representation, validation, stationary measure and conductances.

Rates live in an outgoing adjacency map ``rates[x][y] -> ScaledQuantity``.
State identifiers are opaque strings; model generators (e.g. the Ising
module) map their configurations to strings.

The stationary measure is kept unnormalized, anchored at a reference
state.  Every downstream quantity of the hierarchy is a ratio, invariant
under the anchor choice.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from . import errors
from .scale import (ScaleBasis, ScaledQuantity, ZERO, Comparison, compare, sq)

__all__ = ["Chain", "StationaryMeasure", "Conductance",
           "build_chain", "stationary_measure", "conductances"]


@dataclass(frozen=True)
class Chain:
    states: tuple
    rates: dict           # x -> {y: ScaledQuantity}
    basis: ScaleBasis | None = None
    index: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.index:
            object.__setattr__(self, "index",
                               {s: i for i, s in enumerate(self.states)})

    def rate(self, x, y):
        return self.rates.get(x, {}).get(y, ZERO)

    def out_edges(self, x):
        return self.rates.get(x, {})

    def n_states(self):
        return len(self.states)


def _check_strong_connectivity(states, rates):
    # support is already symmetric here, so one BFS suffices
    if not states:
        raise errors.NotIrreducible("empty state set")
    seen = {states[0]}
    stack = [states[0]]
    while stack:
        x = stack.pop()
        for y in rates.get(x, {}):
            if y not in seen:
                seen.add(y)
                stack.append(y)
    if len(seen) != len(states):
        missing = next(s for s in states if s not in seen)
        raise errors.NotIrreducible(
            f"no path between {states[0]!r} and {missing!r}")


def build_chain(states, edges, basis: ScaleBasis | None = None) -> Chain:
    """Validate and assemble a Chain.

    ``edges`` maps (x, y) pairs to ScaledQuantity rates (or is an iterable of
    (x, y, rate) triples).  Absent pairs mean rate zero.
    """
    states = tuple(states)
    if len(set(states)) != len(states):
        raise errors.ModelError("duplicate state identifiers")
    known = set(states)

    if isinstance(edges, dict):
        items = [(x, y, r) for (x, y), r in edges.items()]
    else:
        items = list(edges)

    rates = {s: {} for s in states}
    for x, y, r in items:
        if x not in known or y not in known:
            raise errors.ModelError(f"edge ({x!r}, {y!r}) uses an unknown state")
        if x == y:
            raise errors.ModelError(f"self-loop at {x!r} is not a jump rate")
        if not isinstance(r, ScaledQuantity):
            raise errors.ModelError(f"rate for ({x!r}, {y!r}) must be a ScaledQuantity")
        if y in rates[x]:
            raise errors.ModelError(f"duplicate edge ({x!r}, {y!r})")
        rates[x][y] = r

    min_order = None
    for x in states:
        for y, r in rates[x].items():
            if x not in rates.get(y, {}):
                raise errors.AsymmetricSupport(
                    f"rate {x!r}->{y!r} given but {y!r}->{x!r} absent")
            if r.order < 0:
                raise errors.NegativeRateOrder(
                    f"rate {x!r}->{y!r} has order {r.order} < 0; rates may not diverge")
            if min_order is None or r.order < min_order:
                min_order = r.order

    if min_order is None:
        raise errors.NotIrreducible("chain has no edges")
    if min_order != 0:
        raise errors.NoOrderZeroRate(
            f"minimal rate order is {min_order}, but some rate must have order 0 "
            f"(rescale time so the fastest rates are of order one)")

    _check_strong_connectivity(states, rates)
    return Chain(states, rates, basis)


@dataclass(frozen=True)
class StationaryMeasure:
    mu: dict               # state -> ScaledQuantity
    reference: str

    def __getitem__(self, x):
        return self.mu[x]

    def total(self, states):
        acc = ZERO
        for x in states:
            acc = acc + self.mu[x]
        return acc


def stationary_measure(chain: Chain, reference=None, traversal="default") -> StationaryMeasure:
    """Unnormalized reversible measure via rate ratios on a spanning tree.

    After the tree pass every non-tree edge is checked for exact detailed
    balance; a violation names the offending cycle.  ``traversal`` exists to
    let tests force a different spanning tree (the result must not change).
    """
    if reference is None:
        reference = chain.states[0]
    if reference not in chain.index:
        raise errors.ModelError(f"unknown reference state {reference!r}")

    order_key = chain.index
    mu = {reference: sq(1, 0)}
    parent = {reference: None}
    queue = [reference]
    while queue:
        x = queue.pop(0)
        nbrs = sorted(chain.out_edges(x), key=order_key.get)
        if traversal == "alternate":
            nbrs.reverse()
        for y in nbrs:
            if y in mu:
                continue
            mu[y] = mu[x] * chain.rates[x][y] / chain.rates[y][x]
            parent[y] = x
            queue.append(y)

    for x in chain.states:
        for y, rxy in chain.out_edges(x).items():
            if chain.index[x] > chain.index[y]:
                continue
            if mu[x] * rxy != mu[y] * chain.rates[y][x]:
                cycle = _tree_cycle(parent, x, y)
                raise errors.NotReversible(
                    f"detailed balance fails on edge ({x!r}, {y!r}); "
                    f"cycle {cycle} has rate-ratio product != 1")
    return StationaryMeasure(mu, reference)


def _tree_cycle(parent, x, y):
    def path_to_root(s):
        out = [s]
        while parent[out[-1]] is not None:
            out.append(parent[out[-1]])
        return out

    px, py = path_to_root(x), path_to_root(y)
    common = None
    seen = set(px)
    for s in py:
        if s in seen:
            common = s
            break
    cut = px[:px.index(common) + 1]
    return cut + list(reversed(py[:py.index(common)])) + [x]


@dataclass(frozen=True)
class Conductance:
    adj: dict              # x -> {y: ScaledQuantity}, symmetric

    def get(self, x, y):
        return self.adj.get(x, {}).get(y, ZERO)

    def edges(self, index):
        """Iterate unordered edges (x, y, g) once, x before y in state order."""
        for x, nbrs in self.adj.items():
            for y, g in nbrs.items():
                if index[x] < index[y]:
                    yield x, y, g


def conductances(chain: Chain, mu: StationaryMeasure) -> Conductance:
    """Symmetric edge weights g(x, y) = mu(x) R(x, y)."""
    interned = {}

    def intern(q):
        key = (q.coeff, q.order)
        return interned.setdefault(key, q)

    adj = {s: {} for s in chain.states}
    for x in chain.states:
        for y, rxy in chain.out_edges(x).items():
            if chain.index[x] > chain.index[y]:
                continue
            g = mu.mu[x] * rxy
            if g != mu.mu[y] * chain.rates[y][x]:
                raise errors.ConsistencyError(
                    f"conductance asymmetry on ({x!r}, {y!r}) after a "
                    f"validated measure")
            g = intern(g)
            adj[x][y] = g
            adj[y][x] = g
    return Conductance(adj)


def measures_equivalent(mu: StationaryMeasure, states) -> bool:
    states = list(states)
    first = mu.mu[states[0]]
    return all(compare(mu.mu[s], first) is Comparison.ASYMP_EQUIV
               for s in states[1:])
