"""Capacity orders via widest-path bottlenecks and sharp prefactors.

The capacity between A and B has the magnitude of the best self-avoiding
path's worst conductance.  Its exact limit constant is the Dirichlet sum of
the limiting equilibrium potential over the critical bonds (the edges whose
conductance shares the bottleneck magnitude).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from fractions import Fraction

from . import errors
from .chain import Chain, Conductance, StationaryMeasure
from .scale import Comparison, ScaledQuantity, compare
from .trace import HittingLimit, hitting_limit

__all__ = ["BottleneckResult", "bottleneck", "BottleneckIndex",
           "union_bottleneck_identity", "SharpCapacity", "sharp_capacity"]

_INF_KEY = (0,)


def _width_key(g):
    """Heap priority: wider conductance sorts first."""
    return (1, g.order, -g.coeff)


def _narrower(a, b):
    return a if _width_key(a) >= _width_key(b) else b


def _wider(a, b):
    return a if _width_key(a) <= _width_key(b) else b


@dataclass(frozen=True)
class BottleneckResult:
    order_quantity: ScaledQuantity
    witness_path: tuple
    critical_bonds: frozenset   # unordered pairs, canonical (x, y) by state order


def bottleneck(cond: Conductance, A, B, index=None, collect_bonds=True) -> BottleneckResult:
    """Maximize over A->B paths the minimum edge conductance (best-first search)."""
    A, B = set(A), set(B)
    if not A or not B:
        raise errors.EmptySubset("bottleneck needs nonempty sets")
    if A & B:
        raise errors.OverlappingSets(f"sets overlap on {sorted(A & B)!r}")
    if index is None:
        index = {x: i for i, x in enumerate(cond.adj)}

    best = {}       # state -> width quantity ("inf" on sources)
    prev = {}
    heap = []
    counter = 0
    for a in sorted(A, key=index.get):
        best[a] = "inf"
        prev[a] = None
        heapq.heappush(heap, (_INF_KEY, counter, a))
        counter += 1

    done = set()
    hit = None
    while heap:
        _, _, x = heapq.heappop(heap)
        if x in done:
            continue
        done.add(x)
        if x in B:
            hit = x
            break
        xwidth = best[x]
        for y, g in sorted(cond.adj.get(x, {}).items(), key=lambda kv: index[kv[0]]):
            if y in done or y in A:
                continue
            width = g if xwidth == "inf" else _narrower(xwidth, g)
            if y not in best or _width_key(width) < _width_key(best[y]):
                best[y] = width
                prev[y] = x
                heapq.heappush(heap, (_width_key(width), counter, y))
                counter += 1

    if hit is None:
        raise errors.Disconnected(f"no path between {sorted(A)!r} and {sorted(B)!r}")

    value = best[hit]
    path = [hit]
    while prev[path[-1]] is not None:
        path.append(prev[path[-1]])
    path.reverse()

    bonds = frozenset()
    if collect_bonds:
        bonds = frozenset(
            (x, y) for x, y, g in cond.edges(index)
            if compare(g, value) is Comparison.ASYMP_EQUIV)
    return BottleneckResult(value, tuple(path), bonds)


class BottleneckIndex:
    """Kruskal merge tree over the conductance graph.

    Built once, it answers bottleneck orders between arbitrary disjoint sets
    by climbing the dendrogram, and reconstructs a witness path inside the
    recorded maximum spanning forest.  Interchangeable with ``bottleneck``
    (asserted in the tests); preferred when many queries hit one chain.
    """

    def __init__(self, cond: Conductance, index=None):
        if index is None:
            index = {x: i for i, x in enumerate(cond.adj)}
        self.index = index
        self.states = sorted(cond.adj, key=index.get)
        n = len(self.states)
        self.node_of = {s: i for i, s in enumerate(self.states)}
        edges = sorted(
            ((g, x, y) for x, y, g in cond.edges(index)),
            key=lambda t: (_width_key(t[0]), self.index[t[1]], self.index[t[2]]))

        size = 2 * n - 1 if n else 0
        self.parent = list(range(size))       # dendrogram, roots point to self
        self.merge_weight = [None] * size
        self.tree_adj = {s: [] for s in self.states}
        dsu = list(range(size))

        def find(i):
            r = i
            while dsu[r] != r:
                r = dsu[r]
            while dsu[i] != r:
                dsu[i], i = r, dsu[i]
            return r

        nxt = n
        for g, x, y in edges:
            rx, ry = find(self.node_of[x]), find(self.node_of[y])
            if rx == ry:
                continue
            self.parent[rx] = self.parent[ry] = nxt
            dsu[rx] = dsu[ry] = nxt
            self.merge_weight[nxt] = g
            self.tree_adj[x].append((y, g))
            self.tree_adj[y].append((x, g))
            nxt += 1
        self.n_nodes = nxt

    def query_order(self, A, B) -> ScaledQuantity:
        """Bottleneck quantity between disjoint sets."""
        A, B = set(A), set(B)
        if not A or not B:
            raise errors.EmptySubset("bottleneck needs nonempty sets")
        if A & B:
            raise errors.OverlappingSets(f"sets overlap on {sorted(A & B)!r}")

        marks = {}
        for a in A:
            i = self.node_of[a]
            while True:
                if marks.get(i, 0) & 1:
                    break
                marks[i] = marks.get(i, 0) | 1
                if self.parent[i] == i:
                    break
                i = self.parent[i]
        candidates = []
        for b in B:
            i = self.node_of[b]
            while True:
                state = marks.get(i, 0)
                if state & 2:
                    break
                marks[i] = state | 2
                if state & 1:
                    candidates.append(i)
                    break
                if self.parent[i] == i:
                    break
                i = self.parent[i]
        if not candidates:
            raise errors.Disconnected(
                f"no path between {sorted(A)!r} and {sorted(B)!r}")
        weights = [self.merge_weight[i] for i in candidates]
        best = weights[0]
        for w in weights[1:]:
            best = _wider(best, w)
        return best

    def query(self, A, B):
        """Bottleneck quantity plus a witness path."""
        value = self.query_order(A, B)
        path = self._forest_path(set(A), set(B), value)
        return value, path

    def _forest_path(self, A, B, value):
        key = _width_key(value)
        prev = {}
        queue = sorted(A, key=self.index.get)
        seen = set(queue)
        while queue:
            x = queue.pop(0)
            if x in B:
                path = [x]
                while path[-1] in prev:
                    path.append(prev[path[-1]])
                path.reverse()
                return _trim_path(tuple(path), A, B)
            for y, g in self.tree_adj[x]:
                if y in seen or _width_key(g) > key:
                    continue
                seen.add(y)
                prev[y] = x
                queue.append(y)
        raise errors.Disconnected("witness reconstruction failed")


def _trim_path(path, A, B):
    start = max(i for i, s in enumerate(path) if s in A)
    path = path[start:]
    end = min(i for i, s in enumerate(path) if s in B)
    return path[:end + 1]


def union_bottleneck_identity(cond: Conductance, A, B, C, index=None) -> bool:
    """Check G(A, B u C) == max(G(A, B), G(A, C)) including constants."""
    A, B, C = set(A), set(B), set(C)
    if (A & B) or (A & C) or (B & C):
        raise errors.OverlappingSets("sets must be pairwise disjoint")

    def value(target):
        try:
            return bottleneck(cond, A, target, index,
                              collect_bonds=False).order_quantity
        except errors.Disconnected:
            return None

    lhs = value(B | C)
    parts = [g for g in (value(B), value(C)) if g is not None]
    rhs = None
    for g in parts:
        rhs = g if rhs is None else _wider(rhs, g)
    return lhs == rhs


@dataclass(frozen=True)
class SharpCapacity:
    value: ScaledQuantity
    harmonic: HittingLimit
    bottleneck: BottleneckResult


def sharp_capacity(chain: Chain, mu: StationaryMeasure, cond: Conductance,
                   A, B) -> SharpCapacity:
    """Exact limit of Cap(A, B): bottleneck order, critical-bond Dirichlet sum.

    The limiting equilibrium potential must be constant across every edge of
    conductance strictly above the bottleneck magnitude; a violation is fatal
    because it voids the prefactor formula.
    """
    A, B = set(A), set(B)
    bres = bottleneck(cond, A, B, chain.index)
    f = hitting_limit(chain, A, B, mu)

    coeff = Fraction(0)
    for x, y, g in cond.edges(chain.index):
        rel = compare(g, bres.order_quantity)
        if rel is Comparison.SUCC and f[x] != f[y]:
            raise errors.HarmonicInconsistency(
                f"potential jumps across ({x!r}, {y!r}) of conductance above "
                f"the bottleneck magnitude")
        if rel is Comparison.ASYMP_EQUIV:
            d = f[y] - f[x]
            coeff += g.coeff * d * d
    if coeff == 0:
        raise errors.ConsistencyError(
            "critical bonds carry no potential drop; bond set too small")
    return SharpCapacity(ScaledQuantity(coeff, bres.order_quantity.order),
                         f, bres)
