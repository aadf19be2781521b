"""Metastable hierarchy construction.

Level 1 collapses the order-one jump graph: its sink strongly connected
components are the shallowest metastable sets.  Each further level measures
every metastable set's depth (measure over capacity to the other sets),
takes the shallowest scale as the level's clock, computes the limiting
jump probabilities between sets, and condenses the positive-rate graph to
obtain the next, coarser family of metastable sets.  The recursion strictly
shrinks the family, so it terminates in a single absorbing class.

Exit quantities are computed on a localized subchain: only states reachable
from the set through edges of at least the bottleneck conductance magnitude
can carry leading-order exit flow, and states from which the order-one
dynamics surely funnels into one target set may be merged into that target.
Both reductions are exact in the limit; on small chains the results are
re-derived through the global, unlocalized constructions and must agree.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from fractions import Fraction

from . import errors
from .capacity import BottleneckIndex, sharp_capacity
from .chain import Chain, Conductance, StationaryMeasure, conductances, stationary_measure
from .scale import (Comparison, ScaledQuantity, ZERO, add, compare, is_zero,
                    limit_ratio, magnitude_key, sq)
from .trace import Eliminator, average_rate, hitting_limit, trace_onto

__all__ = ["HierarchyLevel", "HierarchyReport", "DepthOrder", "level1_leaves",
           "level_depths", "level_rates", "next_level", "full_hierarchy"]

# below this size every spec-level construction (per-state hitting traces,
# full-chain trace for the rate identity, global sharp capacities) is also
# run and compared against the localized computation
FULL_CHECK_MAX_STATES = 128

_MAX_COMMIT_SET = 3


@dataclass(frozen=True)
class DepthOrder:
    """Order-only depth for sets whose exact prefactor was not required."""
    order: Fraction


@dataclass
class HierarchyLevel:
    level: int
    metastates: list            # list of tuples of states
    delta: tuple                # cumulative Delta_k
    theta: ScaledQuantity
    depths: dict                # index -> ScaledQuantity | DepthOrder
    active: set                 # S_k, indices
    lam: dict                   # index -> Fraction (0 outside S_k)
    hit_prob: dict              # (i, j) -> Fraction, rows present where computed
    limit_rates: dict           # (i, j) -> Fraction
    parent_map: dict            # index -> tuple of previous-level indices
    notes: list = field(default_factory=list)


@dataclass
class HierarchyReport:
    levels: list
    depth_count: int
    fingerprint: str
    anchor: str
    terminal: list              # metastate sets of the final (single) class
    note: str | None = None


# ---------------------------------------------------------------------------
# level 1: strongly connected components of the order-one jump graph

def _scc(states, succ):
    """Iterative Tarjan; returns component id per state, ids in discovery order."""
    index = {}
    low = {}
    comp = {}
    stack = []
    on_stack = set()
    counter = 0
    n_comp = 0
    for root in states:
        if root in index:
            continue
        work = [(root, iter(succ(root)))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            x, it = work[-1]
            advanced = False
            for y in it:
                if y not in index:
                    index[y] = low[y] = counter
                    counter += 1
                    stack.append(y)
                    on_stack.add(y)
                    work.append((y, iter(succ(y))))
                    advanced = True
                    break
                elif y in on_stack:
                    if index[y] < low[x]:
                        low[x] = index[y]
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                if low[x] < low[parent]:
                    low[parent] = low[x]
            if low[x] == index[x]:
                while True:
                    y = stack.pop()
                    on_stack.discard(y)
                    comp[y] = n_comp
                    if y == x:
                        break
                n_comp += 1
    return comp, n_comp


def _order_one_graph(chain):
    def succ(x):
        return (y for y, r in chain.out_edges(x).items() if r.order == 0)
    return succ


def level1_leaves(chain: Chain, mu: StationaryMeasure):
    """Sink components of the order-one graph: the level-1 metastates and Delta."""
    succ = _order_one_graph(chain)
    comp, n_comp = _scc(chain.states, succ)

    members = [[] for _ in range(n_comp)]
    for s in chain.states:
        members[comp[s]].append(s)
    is_sink = [True] * n_comp
    for x in chain.states:
        for y in succ(x):
            if comp[y] != comp[x]:
                is_sink[comp[x]] = False

    for group in members:
        first = mu.mu[group[0]]
        for s in group[1:]:
            if compare(mu.mu[s], first) is not Comparison.ASYMP_EQUIV:
                raise errors.ConsistencyError(
                    f"states {group[0]!r} and {s!r} share an order-one class "
                    f"but have measures of different magnitude")

    key = chain.index
    leaves = sorted((tuple(sorted(members[c], key=key.get))
                     for c in range(n_comp) if is_sink[c]),
                    key=lambda t: key[t[0]])
    leaf_set = {s for group in leaves for s in group}
    delta = tuple(s for s in chain.states if s not in leaf_set)
    return leaves, delta


# ---------------------------------------------------------------------------
# engine with cached global structures

class _ExitEngine:
    def __init__(self, chain, mu, cond):
        self.chain = chain
        self.mu = mu
        self.cond = cond
        self.bneck = BottleneckIndex(cond, chain.index)
        self._leaf_structures()

    def _leaf_structures(self):
        chain = self.chain
        succ = _order_one_graph(chain)
        comp, n_comp = _scc(chain.states, succ)
        self.comp = comp
        out_comp = [set() for _ in range(n_comp)]
        for x in chain.states:
            for y in succ(x):
                if comp[y] != comp[x]:
                    out_comp[comp[x]].add(comp[y])
        # reachable sink components, capped; None marks "too many to track"
        reach = [None] * n_comp
        order = self._topo(out_comp, n_comp)
        for c in order:
            if not out_comp[c]:
                reach[c] = frozenset([c])
                continue
            acc = set()
            ok = True
            for d in out_comp[c]:
                if reach[d] is None:
                    ok = False
                    break
                acc |= reach[d]
                if len(acc) > _MAX_COMMIT_SET:
                    ok = False
                    break
            reach[c] = frozenset(acc) if ok else None
        self.reach = reach
        self.sink_members = {}
        for s in chain.states:
            c = comp[s]
            if not out_comp[c]:
                self.sink_members.setdefault(c, []).append(s)

    @staticmethod
    def _topo(out_comp, n):
        indeg = [0] * n
        for c in range(n):
            for d in out_comp[c]:
                indeg[d] += 1
        queue = [c for c in range(n) if indeg[c] == 0]
        order = []
        while queue:
            c = queue.pop()
            order.append(c)
            for d in out_comp[c]:
                indeg[d] -= 1
                if indeg[d] == 0:
                    queue.append(d)
        order.reverse()
        return order

    def commitments(self, metastates):
        """state -> metastate index it surely funnels into, via order-one jumps."""
        leaf_class_target = {}
        member_of = {}
        for j, group in enumerate(metastates):
            for s in group:
                member_of[s] = j
        for c, group in self.sink_members.items():
            j = member_of.get(group[0])
            leaf_class_target[c] = j     # None when the leaf fell into Delta
        commit = {}
        for s in self.chain.states:
            if s in member_of:
                continue
            classes = self.reach[self.comp[s]]
            if classes is None:
                continue
            targets = {leaf_class_target.get(c) for c in classes}
            if len(targets) == 1:
                j = targets.pop()
                if j is not None:
                    commit[s] = j
        return commit, member_of

    # -- localized exit analysis --------------------------------------------

    def exit_analysis(self, metastates, i, commit, member_of):
        """Depth and exit splits of metastate i against the others.

        Returns (depth quantity, {j: Fraction split}) computed on the
        conductance-bounded zone around E_i, with an always-on consistency
        check equating the critical-bond Dirichlet sum and the trace rate.
        """
        chain, cond, mu = self.chain, self.cond, self.mu
        source = set(metastates[i])
        others = [s for j, g in enumerate(metastates) if j != i for s in g]
        qstar = self.bneck.query_order(source, others).order

        zone, boundary = self._zone(source, qstar, i, commit, member_of)
        tnode = {}
        rates = {x: {} for x in zone}
        for x in zone:
            for y, r in chain.out_edges(x).items():
                if y in zone:
                    rates[x][y] = r
                elif y in boundary:
                    t = tnode.setdefault(boundary[y], ("__target__", boundary[y]))
                    rates[x][t] = add(rates[x].get(t, ZERO), r)
        for t in tnode.values():
            rates[t] = {}

        elim = Eliminator(rates)
        key = chain.index
        for w in sorted((x for x in zone if x not in source), key=key.get):
            elim.eliminate(w)

        # average exit rate: depth is its inverse (Cap(E_i, rest) / mu(E_i))
        flow = ZERO
        mass = ZERO
        per_target = {}
        for x in source:
            mass = add(mass, mu.mu[x])
            for t, r in elim.adj[x].items():
                if isinstance(t, tuple):
                    flow = add(flow, mu.mu[x] * r)
        if is_zero(flow):
            raise errors.Disconnected(
                f"metastate {sorted(source)!r} has no exit route")
        rate = flow / mass
        depth = sq(1, 0) / rate

        # splits, one row per member state; they must agree
        rows = []
        for x in sorted(source, key=key.get):
            sub = Eliminator({s: dict(n) for s, n in elim.adj.items()})
            for w in sorted((s for s in source if s != x), key=key.get):
                sub.eliminate(w)
            total = ZERO
            into = {}
            for t, r in sub.adj[x].items():
                total = add(total, r)
                into[t[1]] = add(into.get(t[1], ZERO), r)
            row = {}
            for j in range(len(metastates)):
                if j == i:
                    continue
                value = limit_ratio(into.get(j, ZERO), total) if j in into else Fraction(0)
                row[j] = value
            rows.append((x, row))
        first = rows[0][1]
        for x, row in rows[1:]:
            if row != first:
                raise errors.StartDependentHitting(
                    f"exit split from {sorted(source)!r} differs between "
                    f"{rows[0][0]!r} and {x!r}")

        self._zone_potential_check(source, qstar, zone, boundary, elim, flow)
        return depth, first

    def _zone(self, source, qstar, i, commit, member_of):
        cond = self.cond
        zone = set(source)
        boundary = {}
        queue = list(source)
        while queue:
            x = queue.pop()
            for y, g in cond.adj.get(x, {}).items():
                if g.order > qstar:
                    continue
                if y in zone or y in boundary:
                    continue
                j = member_of.get(y)
                if j is not None and j != i:
                    boundary[y] = j
                    continue
                j = commit.get(y)
                if j is not None and j != i:
                    boundary[y] = j
                    continue
                zone.add(y)
                queue.append(y)
        return zone, boundary

    def _zone_potential_check(self, source, qstar, zone, boundary, elim, flow):
        """Critical-bond Dirichlet sum must reproduce Cap(E_i, rest) exactly."""
        values = {x: Fraction(1) for x in source}
        for t in elim.adj:
            if isinstance(t, tuple):
                values[t] = Fraction(0)
        f = elim.harmonic_extension(values)

        cond, index = self.cond, self.chain.index
        coeff = Fraction(0)
        for x in zone:
            fx = f[x]
            for y, g in cond.adj.get(x, {}).items():
                if y in zone and index[y] < index[x]:
                    continue
                if y in zone:
                    fy = f[y]
                elif y in boundary:
                    fy = Fraction(0)
                else:
                    continue
                if g.order < qstar and fx != fy:
                    raise errors.HarmonicInconsistency(
                        f"limit potential jumps across ({x!r}, {y!r}) above "
                        f"the bottleneck magnitude")
                if g.order == qstar:
                    coeff += g.coeff * (fx - fy) ** 2
        cap = ScaledQuantity(coeff, qstar) if coeff else ZERO
        if cap != flow:
            raise errors.ConsistencyError(
                f"sharp capacity routes disagree on {sorted(source)!r}: "
                f"Dirichlet sum {cap!r} vs trace flow {flow!r}")


# ---------------------------------------------------------------------------
# spec-level operations

def level_depths(chain, mu, cond, metastates, prev_theta=None, engine=None):
    """Depths, level time scale, active set and its rate factors."""
    if len(metastates) < 2:
        raise errors.QueryError("level depths need at least two metastates")
    if engine is None:
        engine = _ExitEngine(chain, mu, cond)
    commit, member_of = engine.commitments(metastates)
    small = chain.n_states() <= FULL_CHECK_MAX_STATES

    prev_order = prev_theta.order if prev_theta is not None else Fraction(0)
    depth_orders = {}
    for i, group in enumerate(metastates):
        others = [s for j, g in enumerate(metastates) if j != i for s in g]
        qstar = engine.bneck.query_order(set(group), others).order
        mass = mu.total(group)
        depth_orders[i] = mass.order - qstar
        if depth_orders[i] >= 0:
            raise errors.DepthNotDiverging(
                f"depth of {sorted(group)!r} does not diverge; the set is "
                f"not metastable")
        if depth_orders[i] >= prev_order:
            raise errors.ConsistencyError(
                f"depth of {sorted(group)!r} fails to exceed the previous "
                f"level's time scale")

    theta_order = max(depth_orders.values())
    active = {i for i, o in depth_orders.items() if o == theta_order}

    depths = {}
    splits = {}
    for i in sorted(depth_orders):
        if i in active or small:
            depth, row = engine.exit_analysis(metastates, i, commit, member_of)
            if depth.order != depth_orders[i]:
                raise errors.ConsistencyError(
                    f"depth order mismatch on metastate {i}")
            depths[i] = depth
            splits[i] = row
        else:
            depths[i] = DepthOrder(depth_orders[i])

    theta = min((depths[i] for i in active), key=magnitude_key)
    lam = {}
    for i in depth_orders:
        if i in active:
            lam[i] = limit_ratio(theta, depths[i])
        else:
            lam[i] = Fraction(0)

    if small:
        _check_depths_against_sharp_capacity(chain, mu, cond, metastates, depths)

    engine._last_splits = splits
    return depths, theta, active, lam


def _check_depths_against_sharp_capacity(chain, mu, cond, metastates, depths):
    for i, group in enumerate(metastates):
        others = {s for j, g in enumerate(metastates) if j != i for s in g}
        cap = sharp_capacity(chain, mu, cond, set(group), others)
        expected = mu.total(group) / cap.value
        if depths[i] != expected:
            raise errors.ConsistencyError(
                f"localized depth of metastate {i} disagrees with the "
                f"sharp-capacity route: {depths[i]!r} vs {expected!r}")


def level_rates(chain, metastates, active, lam, theta, mu=None, cond=None,
                engine=None, crosscheck="auto"):
    """Limiting hit probabilities p(i, j) and rates lambda(i) p(i, j).

    The rates are independently recomputed through the trace chain on the
    union of the metastates (average-rate identity) and must agree exactly;
    this cross-check runs whenever the chain is small enough to eliminate
    globally, or always under ``crosscheck='full'``.
    """
    if mu is None:
        mu = stationary_measure(chain)
    if cond is None:
        cond = conductances(chain, mu)
    if engine is None:
        engine = _ExitEngine(chain, mu, cond)
        engine._last_splits = {}
    splits = getattr(engine, "_last_splits", {})
    commit, member_of = engine.commitments(metastates)
    small = chain.n_states() <= FULL_CHECK_MAX_STATES

    hit_prob = {}
    limit_rates = {}
    nu = len(metastates)
    for i in range(nu):
        if i not in splits:
            if i in active or small:
                _, splits[i] = engine.exit_analysis(metastates, i, commit, member_of)
            else:
                continue
        row = splits[i]
        total = sum(row.values())
        if i in active and total != 1:
            raise errors.ConsistencyError(
                f"exit split of active metastate {i} sums to {total}, not 1")
        for j, p in row.items():
            hit_prob[(i, j)] = p
            limit_rates[(i, j)] = lam[i] * p if i in active else Fraction(0)

    _check_rate_monotonicity(mu, metastates, active, limit_rates)
    if small:
        _check_splits_against_hitting_limits(chain, mu, metastates, splits)
    do_cross = crosscheck == "full" or (crosscheck == "auto" and small)
    if do_cross:
        _crosscheck_rate_identity(chain, mu, metastates, active, theta,
                                  limit_rates)
    return hit_prob, limit_rates


def _check_rate_monotonicity(mu, metastates, active, limit_rates):
    masses = [mu.total(g) for g in metastates]
    for (i, j), r in limit_rates.items():
        if r and compare(masses[j], masses[i]) is Comparison.PREC:
            raise errors.ConsistencyError(
                f"limit rate {i}->{j} positive although the target has "
                f"measure of smaller magnitude")


def _check_splits_against_hitting_limits(chain, mu, metastates, splits):
    for i, row in splits.items():
        others = {s for j, g in enumerate(metastates) if j != i for s in g}
        for j, p in row.items():
            target = set(metastates[j])
            rest = others - target
            if not rest:
                if p != 1:
                    raise errors.CrossCheckMismatch(
                        f"sole exit target {j} of metastate {i} has split {p}")
                continue
            f = hitting_limit(chain, target, rest, mu)
            for x in metastates[i]:
                if f[x] != p:
                    raise errors.CrossCheckMismatch(
                        f"hitting limit from {x!r} to metastate {j} is "
                        f"{f[x]}, localized split says {p}")


def _crosscheck_rate_identity(chain, mu, metastates, active, theta,
                              limit_rates):
    from .trace import trace_chain_of
    union = {s for g in metastates for s in g}
    if union == set(chain.states):
        t = trace_chain_of(chain, mu)
    else:
        t = trace_onto(chain, union, mu)
    nu = len(metastates)
    for i in range(nu):
        for j in range(nu):
            if i == j:
                continue
            r = average_rate(t, set(metastates[i]), set(metastates[j]))
            scaled = theta * r
            expected = limit_rates.get((i, j), Fraction(0)) \
                if i in active else Fraction(0)
            if is_zero(scaled):
                observed = Fraction(0)
            elif scaled.order > 0:
                observed = Fraction(0)
            elif scaled.order == 0:
                observed = scaled.coeff
            else:
                raise errors.CrossCheckMismatch(
                    f"scaled average rate {i}->{j} diverges")
            if observed != expected:
                raise errors.CrossCheckMismatch(
                    f"rate identity fails for {i}->{j}: trace route gives "
                    f"{observed}, hierarchy gives {expected}")


def next_level(metastates, limit_rates):
    """Condense the positive-rate graph; sinks become the next metastates."""
    nu = len(metastates)
    succ_map = {i: set() for i in range(nu)}
    for (i, j), r in limit_rates.items():
        if r:
            succ_map[i].add(j)
    comp, n_comp = _scc(list(range(nu)), lambda i: succ_map[i])
    class_members = [[] for _ in range(n_comp)]
    for i in range(nu):
        class_members[comp[i]].append(i)
    sinks = [True] * n_comp
    for i in range(nu):
        for j in succ_map[i]:
            if comp[j] != comp[i]:
                sinks[comp[i]] = False

    new_metastates = []
    parents = []
    absorbed = []
    for c in range(n_comp):
        group = sorted(class_members[c])
        if sinks[c]:
            merged = tuple(sorted({s for i in group for s in metastates[i]}))
            new_metastates.append((merged, tuple(group)))
        else:
            absorbed.extend(group)
    new_metastates.sort(key=lambda t: t[0])
    groups = [g for g, _ in new_metastates]
    parents = [p for _, p in new_metastates]
    delta_increment = tuple(s for i in sorted(absorbed) for s in metastates[i])
    classes = [tuple(sorted(class_members[c])) for c in range(n_comp)]
    return groups, parents, delta_increment, classes


def _check_class_measures(mu, metastates, classes):
    for group in classes:
        first = mu.total(metastates[group[0]])
        for i in group[1:]:
            if compare(mu.total(metastates[i]), first) is not Comparison.ASYMP_EQUIV:
                raise errors.ConsistencyError(
                    "equivalent metastates have measures of different magnitude")


def full_hierarchy(chain: Chain, reference=None, crosscheck="auto",
                   fingerprint="") -> HierarchyReport:
    """Run the complete recursion and return every level with at least two sets."""
    mu = stationary_measure(chain, reference)
    cond = conductances(chain, mu)
    metastates, delta = level1_leaves(chain, mu)
    if len(metastates) == 1:
        return HierarchyReport(
            levels=[], depth_count=0, fingerprint=fingerprint,
            anchor=mu.reference, terminal=[list(metastates[0])],
            note="no metastability: the order-one dynamics has a single "
                 "absorbing class")

    engine = _ExitEngine(chain, mu, cond)
    levels = []
    parent_map = {i: (s,) for i, s in enumerate(metastates)}  # level-1: states
    prev_theta = None
    k = 1
    while True:
        depths, theta, active, lam = level_depths(
            chain, mu, cond, metastates, prev_theta, engine)
        hit_prob, limit_rates = level_rates(
            chain, metastates, active, lam, theta, mu, cond, engine,
            crosscheck)
        for i, group in enumerate(metastates):
            if not _measures_equivalent(mu, group):
                raise errors.ConsistencyError(
                    f"metastate {i} at level {k} mixes measure magnitudes")
        level = HierarchyLevel(
            level=k, metastates=list(metastates), delta=delta, theta=theta,
            depths=depths, active=active, lam=lam, hit_prob=hit_prob,
            limit_rates=limit_rates, parent_map=dict(parent_map))
        if chain.n_states() > FULL_CHECK_MAX_STATES:
            level.notes.append(
                "informational exit splits of inactive sets skipped; "
                "rate identity cross-checked on small chains only")
        levels.append(level)

        groups, parents, delta_inc, classes = next_level(metastates, limit_rates)
        _check_class_measures(mu, metastates, classes)
        if len(groups) >= len(metastates):
            raise errors.ConsistencyError(
                "metastate count failed to decrease between levels")
        if prev_theta is not None and compare(theta, prev_theta) is not Comparison.SUCC:
            raise errors.ConsistencyError("time scales are not increasing")
        if len(groups) == 1:
            terminal = groups[0]
            break
        for i, g in enumerate(groups):
            for s in g:
                if s in delta_inc:
                    raise errors.ConsistencyError("partition broken")
        delta = tuple(sorted(set(delta) | set(delta_inc), key=chain.index.get))
        parent_map = {i: parents[i] for i in range(len(groups))}
        metastates = groups
        prev_theta = theta
        k += 1

    return HierarchyReport(
        levels=levels, depth_count=len(levels), fingerprint=fingerprint,
        anchor=mu.reference, terminal=[list(terminal)])


def _measures_equivalent(mu, states):
    states = list(states)
    first = mu.mu[states[0]]
    return all(compare(mu.mu[s], first) is Comparison.ASYMP_EQUIV
               for s in states[1:])
