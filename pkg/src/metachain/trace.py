"""Trace-process rates by single-state elimination, average rates, hitting limits.

Eliminating w from the kept set replaces every pair rate by

    R'(x, y) = R(x, y) + R(x, w) R(w, y) / sum_z R(w, z)

which never subtracts, so leading-order monomial arithmetic stays exact and
the result is independent of the elimination order.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from . import errors
from .chain import Chain, StationaryMeasure
from .scale import ZERO, add, is_zero, limit_ratio, sq

__all__ = ["TraceChain", "Eliminator", "eliminate_state", "trace_onto",
           "average_rate", "HittingLimit", "hitting_limit"]

# re-running every trace in reverse order is a built-in correctness probe;
# past this size it would dominate runtime for no extra confidence
_ORDER_CHECK_MAX_STATES = 64


@dataclass(frozen=True)
class TraceChain:
    kept: tuple
    rates: dict            # x -> {y: ScaledQuantity} over kept states
    mu: dict               # restriction of the stationary measure

    def rate(self, x, y):
        return self.rates.get(x, {}).get(y, ZERO)

    def total_rate(self, x):
        acc = ZERO
        for r in self.rates.get(x, {}).values():
            acc = add(acc, r)
        return acc


class Eliminator:
    """Mutable adjacency with recorded elimination steps.

    The record allows harmonic back-substitution: if f is a limit of hitting
    probabilities known on the kept states, it extends to every eliminated
    state w via f(w) = sum_z lim[R'(w,z)/T_w] f(z) with the rates R' frozen
    at the step where w was removed.
    """

    def __init__(self, rates):
        self.adj = {x: dict(nbrs) for x, nbrs in rates.items()}
        self.radj = {x: set() for x in self.adj}
        for x, nbrs in self.adj.items():
            for y in nbrs:
                self.radj[y].add(x)
        self.record = []   # (w, out_rates_at_removal, total_rate)

    def eliminate(self, w):
        out_w = self.adj.pop(w)
        total = ZERO
        for r in out_w.values():
            total = add(total, r)
        for y in out_w:
            self.radj[y].discard(w)
        incoming = self.radj.pop(w)
        for x in incoming:
            rxw = self.adj[x].pop(w)
            through = rxw / total
            row = self.adj[x]
            for z, rwz in out_w.items():
                if z == x:
                    continue
                row[z] = add(row.get(z, ZERO), through * rwz)
                self.radj[z].add(x)
        self.record.append((w, out_w, total))

    def harmonic_extension(self, boundary_values):
        """Extend limit values from kept states through the eliminated ones."""
        f = dict(boundary_values)
        for w, out_w, total in reversed(self.record):
            acc = Fraction(0)
            for z, rwz in out_w.items():
                weight = limit_ratio(rwz, total)
                if weight:
                    acc += weight * f[z]
            f[w] = acc
        return f


def _run_elimination(rates, remove):
    elim = Eliminator(rates)
    for w in remove:
        elim.eliminate(w)
    return elim


def eliminate_state(t: TraceChain, w) -> TraceChain:
    """Remove one state from a trace chain."""
    if w not in set(t.kept):
        raise errors.StateNotKept(f"{w!r} is not in the kept set")
    if len(t.kept) < 3:
        raise errors.TooFewStates("need at least 3 kept states to eliminate one")
    elim = _run_elimination(t.rates, [w])
    kept = tuple(s for s in t.kept if s != w)
    mu = {s: t.mu[s] for s in kept}
    return TraceChain(kept, elim.adj, mu)


def trace_chain_of(chain: Chain, mu: StationaryMeasure) -> TraceChain:
    return TraceChain(chain.states, {x: dict(n) for x, n in chain.rates.items()},
                      dict(mu.mu))


def trace_onto(chain_or_trace, F, mu: StationaryMeasure | None = None,
               order="ascending") -> TraceChain:
    """Trace onto the subset F by eliminating the complement one state at a time."""
    if isinstance(chain_or_trace, Chain):
        if mu is None:
            from .chain import stationary_measure
            mu = stationary_measure(chain_or_trace)
        base = trace_chain_of(chain_or_trace, mu)
    else:
        base = chain_or_trace

    keep = set(F)
    if not keep:
        raise errors.EmptySubset("cannot trace onto the empty set")
    unknown = keep - set(base.kept)
    if unknown:
        raise errors.StateNotKept(f"states {sorted(unknown)!r} not present")
    if keep == set(base.kept):
        raise errors.FullSet("tracing onto the full state set is a no-op")

    position = {s: i for i, s in enumerate(base.kept)}
    remove = sorted((s for s in base.kept if s not in keep), key=position.get)
    if order == "descending":
        remove.reverse()
    elim = _run_elimination(base.rates, remove)
    kept = tuple(s for s in base.kept if s in keep)
    result = TraceChain(kept, elim.adj, {s: base.mu[s] for s in kept})

    if __debug__ and order == "ascending" and len(base.kept) <= _ORDER_CHECK_MAX_STATES:
        other = _run_elimination(base.rates, list(reversed(remove)))
        assert other.adj == result.rates, "elimination order changed the trace"
    return result


def average_rate(t: TraceChain, A, B):
    """Average jump rate of the trace from A to B, mu-weighted over A."""
    A, B = set(A), set(B)
    if not A or not B:
        raise errors.EmptySubset("average_rate needs nonempty sets")
    if A & B:
        raise errors.OverlappingSets(f"sets overlap on {sorted(A & B)!r}")
    kept = set(t.kept)
    if not A <= kept or not B <= kept:
        raise errors.StateNotKept("average_rate sets must be kept in the trace")
    flow = ZERO
    mass = ZERO
    for x in A:
        mass = add(mass, t.mu[x])
        for y, r in t.rates.get(x, {}).items():
            if y in B:
                flow = add(flow, t.mu[x] * r)
    if is_zero(flow):
        return ZERO
    return flow / mass


@dataclass(frozen=True)
class HittingLimit:
    f: dict                # state -> Fraction in [0, 1]

    def __getitem__(self, x):
        return self.f[x]


def hitting_limit(chain: Chain, A, B, mu: StationaryMeasure | None = None) -> HittingLimit:
    """Limits f(x) = lim P_x[T_A < T_B], one trace onto {x} u A u B per state."""
    A, B = set(A), set(B)
    if not A or not B:
        raise errors.EmptySubset("hitting_limit needs nonempty sets")
    if A & B:
        raise errors.OverlappingSets(f"sets overlap on {sorted(A & B)!r}")
    if mu is None:
        from .chain import stationary_measure
        mu = stationary_measure(chain)
    base = trace_chain_of(chain, mu)

    f = {}
    for x in chain.states:
        if x in A:
            f[x] = Fraction(1)
        elif x in B:
            f[x] = Fraction(0)
        else:
            F = {x} | A | B
            t = base if F == set(base.kept) else trace_onto(base, F)
            into_a = ZERO
            total = ZERO
            for y, r in t.rates.get(x, {}).items():
                total = add(total, r)
                if y in A:
                    into_a = add(into_a, r)
            value = limit_ratio(into_a, total)
            assert value != float("inf")
            f[x] = value
    return HittingLimit(f)
