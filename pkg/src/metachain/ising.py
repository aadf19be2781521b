"""Low-temperature Ising/Glauber chains on the L x L torus.

With eps = e^{-beta}, every Metropolis flip rate is the monomial
eps^{max(dH, 0)} where dH is the energy change of the flip, so the model is
a chain instance for the generic engine.  This module also classifies
configurations (droplet geometry, saddle sets) and evaluates the closed-form
predictions for exit scales and jump probabilities, so that engine output
and closed forms can be compared at small L.  Runs at L <= 4 are outside
the large-torus regime of the closed forms; comparisons carry a flag and
mismatches are data, not failures.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from . import errors
from .chain import Chain
from .scale import ScaleBasis, ScaledQuantity, parse_rational

__all__ = ["IsingModel", "IsingConfigInfo", "SaddleSets", "build_ising_chain",
           "classify", "saddle_sets", "predicted_theta", "predicted_p",
           "minus_one_saddles", "theta_minus_one", "nucleation_exponent",
           "time_scale_table", "enumerate_omega_o", "verify_lemma_t01",
           "minus_one", "plus_one", "hamiltonian", "closure"]

MAX_SIDE = 4            # 2^(L*L) states are enumerated exactly


@dataclass(frozen=True)
class IsingModel:
    L: int
    h: Fraction
    n0: int
    in_regime: bool

    @classmethod
    def create(cls, L, h) -> "IsingModel":
        h = parse_rational(h)
        if not isinstance(L, int) or L < 2:
            raise errors.InvalidField(f"torus side must be an integer >= 2, got {L!r}")
        if not (0 < h < 2):
            raise errors.InvalidField(f"field must satisfy 0 < h < 2, got {h}")
        if (2 / h).denominator == 1:
            raise errors.InvalidField(f"2/h must not be an integer, got h={h}")
        n0 = int(2 / h)
        return cls(L, h, n0, L > (n0 + 1) ** 2 + 1)


def minus_one(L):
    return "-" * (L * L)


def plus_one(L):
    return "+" * (L * L)


@lru_cache(maxsize=None)
def _neighbors(L):
    nbrs = []
    for i in range(L * L):
        r, c = divmod(i, L)
        nbrs.append((((r - 1) % L) * L + c, ((r + 1) % L) * L + c,
                     r * L + (c - 1) % L, r * L + (c + 1) % L))
    return tuple(nbrs)


def _flip(config, site):
    flipped = "+" if config[site] == "-" else "-"
    return config[:site] + flipped + config[site + 1:]


def _delta_h(h, config, site, nbrs):
    """Energy change of flipping ``site``: s(x) * (sum of neighbors) + h * s(x)."""
    s = 1 if config[site] == "+" else -1
    total = sum(1 if config[j] == "+" else -1 for j in nbrs[site])
    return s * total + h * s


def build_ising_chain(L, h, cap=MAX_SIDE):
    """Enumerate the full Glauber chain; returns (Chain, IsingModel)."""
    model = IsingModel.create(L, h)
    if L > cap:
        raise errors.StateSpaceTooLarge(
            f"L={L} means 2^{L * L} states; the exact cap is L <= {cap}")
    n = L * L
    nbrs = _neighbors(L)
    states = ["".join("+" if code >> i & 1 else "-" for i in range(n))
              for code in range(1 << n)]

    interned = {}

    def rate(order):
        if order not in interned:
            interned[order] = ScaledQuantity(Fraction(1), order)
        return interned[order]

    edges = {}
    orders = set()
    for config in states:
        row = {}
        for site in range(n):
            dh = _delta_h(model.h, config, site, nbrs)
            order = Fraction(dh) if dh > 0 else Fraction(0)
            orders.add(order)
            row[_flip(config, site)] = rate(order)
        edges[config] = row

    positive = sorted(o for o in orders if o > 0)
    basis = ScaleBasis([f"lambda{i + 1}" for i in range(len(positive))],
                       positive) if positive else None
    # single-flip support is symmetric and connected by construction
    return Chain(tuple(states), edges, basis), model


def hamiltonian(model, config):
    """H(sigma) = -1/2 sum_bonds s s' - (h/2) sum s, exact."""
    L = model.L
    spins = [1 if c == "+" else -1 for c in config]
    bonds = 0
    for i in range(L * L):
        r, c = divmod(i, L)
        bonds += spins[i] * spins[((r + 1) % L) * L + c]
        bonds += spins[i] * spins[r * L + (c + 1) % L]
    return -Fraction(bonds) - model.h * Fraction(sum(spins), 2)


# ---------------------------------------------------------------------------
# configuration geometry

@dataclass(frozen=True)
class _Component:
    kind: str               # "rectangle" | "ring" | "full" | "other"
    cells: frozenset
    height: int = 0
    width: int = 0


@dataclass(frozen=True)
class IsingConfigInfo:
    config: str
    in_omega_o: bool
    ell: int
    Nr: int
    Ns: int
    components: tuple


def _torus_interval(values, L):
    """(start, length) if the residue set is a circular interval, else None."""
    values = set(values)
    if not values:
        return None
    if len(values) == L:
        return (0, L)
    starts = [v for v in values if (v - 1) % L not in values]
    if len(starts) != 1:
        return None
    return (starts[0], len(values))


def _classify_component(cells, L):
    cells = frozenset(cells)
    if len(cells) == L * L:
        return _Component("full", cells, L, L)
    rows = {i // L for i in cells}
    cols = {i % L for i in cells}
    ri = _torus_interval(rows, L)
    ci = _torus_interval(cols, L)
    if ri and ci and len(cells) == ri[1] * ci[1]:
        if ri[1] == L or ci[1] == L:
            return _Component("ring", cells, ri[1], ci[1])
        return _Component("rectangle", cells, ri[1], ci[1])
    return _Component("other", cells)


def classify(model: IsingModel, config: str) -> IsingConfigInfo:
    """Neighbor-count membership in Omega_o plus droplet geometry."""
    L = model.L
    n = L * L
    nbrs = _neighbors(L)
    plus_set = {i for i in range(n) if config[i] == "+"}

    in_omega = True
    for i in range(n):
        count = sum(1 for j in nbrs[i] if j in plus_set)
        if i in plus_set:
            if 4 - count > 2:
                in_omega = False
                break
        elif count > 1:
            in_omega = False
            break

    comps = []
    seen = set()
    for start in sorted(plus_set):
        if start in seen:
            continue
        stack = [start]
        seen.add(start)
        cells = {start}
        while stack:
            x = stack.pop()
            for y in nbrs[x]:
                if y in plus_set and y not in seen:
                    seen.add(y)
                    cells.add(y)
                    stack.append(y)
        comps.append(_classify_component(cells, L))
    comps.sort(key=lambda c: min(c.cells))

    rect_dims = [(min(c.height, c.width), max(c.height, c.width))
                 for c in comps if c.kind == "rectangle"]
    if not plus_set:
        ell = 0
    elif len(plus_set) == n:
        ell = L
    elif rect_dims:
        ell = min(d[0] for d in rect_dims)
    else:
        ell = L      # only rings
    Nr = sum(1 for d in rect_dims if d[0] == ell and d[1] > ell)
    Ns = sum(1 for d in rect_dims if d[0] == ell and d[1] == ell)

    if in_omega and config not in (minus_one(L), plus_one(L)):
        if any(c.kind not in ("rectangle", "ring") for c in comps):
            raise errors.ConsistencyError(
                f"member of Omega_o with a non-rectangle, non-ring component: "
                f"{config}")
    return IsingConfigInfo(config, in_omega, ell, Nr, Ns, tuple(comps))


# ---------------------------------------------------------------------------
# saddle sets

@dataclass(frozen=True)
class SaddleSets:
    W: frozenset
    Wj: dict                 # j -> frozenset of saddle configurations
    D: frozenset             # direct successors
    S: frozenset             # successors
    Ss: frozenset            # square-flip successors
    W_by_target: dict        # successor -> {j: count}, for ell > n0


def _component_bounds(comp, L):
    rows = {i // L for i in comp.cells}
    cols = {i % L for i in comp.cells}
    return _torus_interval(rows, L), _torus_interval(cols, L)


def _short_sides(comp, L, ell):
    """Sides made of ell cells: columns when the height is ell, rows when
    the width is ell (all four for a square)."""
    (r0, hh), (c0, ww) = _component_bounds(comp, L)
    sides = []
    if hh == ell:
        sides.append(("col", c0))
        sides.append(("col", (c0 + ww - 1) % L))
    if ww == ell:
        sides.append(("row", r0))
        sides.append(("row", (r0 + hh - 1) % L))
    return sides


def _side_cells(comp, L, side):
    axis, k = side
    if axis == "row":
        return sorted(i for i in comp.cells if i // L == k)
    return sorted(i for i in comp.cells if i % L == k)


def _flip_cells(config, cells, to):
    out = list(config)
    for i in cells:
        out[i] = to
    return "".join(out)


def closure(model: IsingModel, config: str) -> str:
    """Flip negative spins with two or more positive neighbors until none remain."""
    L = model.L
    nbrs = _neighbors(L)
    spins = list(config)
    changed = True
    while changed:
        changed = False
        for i in range(L * L):
            if spins[i] == "-" and \
                    sum(1 for j in nbrs[i] if spins[j] == "+") >= 2:
                spins[i] = "+"
                changed = True
    return "".join(spins)


def saddle_sets(model: IsingModel, info: IsingConfigInfo) -> SaddleSets:
    L = model.L
    if not info.in_omega_o or info.config in (minus_one(L), plus_one(L)):
        raise errors.NotInOmegaO(
            "saddle sets are defined for Omega_o members other than the "
            "uniform configurations")
    ell, n0 = info.ell, model.n0
    config = info.config
    nbrs = _neighbors(L)

    if 2 <= ell <= n0:
        W, D, S, Ss = set(), set(), set(), set()
        for comp in info.components:
            if comp.kind != "rectangle" or min(comp.height, comp.width) != ell:
                continue
            square = comp.height == comp.width
            sides = _short_sides(comp, L, ell)
            for side in sides:
                cells = _side_cells(comp, L, side)
                for keep in cells:
                    W.add(_flip_cells(config, [c for c in cells if c != keep], "-"))
            if ell == 2:
                if square:
                    target = _flip_cells(config, comp.cells, "-")
                    D.add(target)
                    Ss.add(target)
                else:
                    for side in sides:
                        D.add(_flip_cells(config, _side_cells(comp, L, side), "-"))
            else:
                for side in sides:
                    flipped = _flip_cells(config, _side_cells(comp, L, side), "-")
                    D.add(flipped)
                    if not square:
                        S.add(flipped)
                if square:
                    Ss.add(_flip_cells(config, comp.cells, "-"))
        S = set(D) if ell == 2 else S | Ss
        Wj = _w_by_corner(model, info, W)
        return SaddleSets(frozenset(W), Wj, frozenset(D), frozenset(S),
                          frozenset(Ss), {})

    # ell > n0: growth through single protuberances and their closures
    W = set()
    for i in range(L * L):
        if config[i] == "-" and \
                sum(1 for j in nbrs[i] if config[j] == "+") == 1:
            W.add(_flip(config, i))
    Wj = {1: set(), 2: set(), 3: set()}
    by_target = {}
    targets = {}
    for xi in sorted(W):
        site = next(i for i in range(L * L) if xi[i] != config[i])
        j = 0
        for nb in nbrs[site]:
            if xi[nb] == "-" and \
                    sum(1 for z in nbrs[nb] if xi[z] == "+") == 2:
                j += 1
        if j not in Wj:
            raise errors.ConsistencyError(
                f"saddle with unexpected completion count {j} at {xi}")
        Wj[j].add(xi)
        target = closure(model, xi)
        targets[xi] = target
        by_target.setdefault(target, {1: 0, 2: 0, 3: 0})[j] += 1
    D = frozenset(targets.values())
    return SaddleSets(frozenset(W), {k: frozenset(v) for k, v in Wj.items()},
                      D, D, frozenset(), by_target)


def _w_by_corner(model, info, W):
    """Split 2 <= ell <= n0 saddles by lone-spin position on the rectangle."""
    L = model.L
    nbrs = _neighbors(L)
    config = info.config
    w1, w2 = set(), set()
    for xi in sorted(W):
        lone = [i for i in range(L * L)
                if xi[i] == "+"
                and sum(1 for j in nbrs[i] if xi[j] == "+") == 1]
        corner = any(sum(1 for j in nbrs[s] if config[j] == "+") == 2
                     for s in lone)
        (w1 if corner else w2).add(xi)
    return {1: frozenset(w1), 2: frozenset(w2)}


# ---------------------------------------------------------------------------
# closed forms

def predicted_theta(model: IsingModel, info: IsingConfigInfo,
                    saddles: SaddleSets | None = None) -> Fraction:
    """Closed-form exit coefficient, by the critical-length case."""
    L = model.L
    if info.config == minus_one(L):
        return theta_minus_one(model)
    if not info.in_omega_o or info.config == plus_one(L):
        raise errors.NotApplicable("theta is defined on Omega_o minus the maximum")
    ell, n0 = info.ell, model.n0
    if ell == 2 <= n0:
        return 2 * Fraction(info.Nr) + Fraction(2, 3) * info.Ns
    if saddles is None:
        saddles = saddle_sets(model, info)
    if 3 <= ell <= n0:
        return Fraction(2 * ell - 1, 3 * ell) * len(saddles.W)
    counts = {j: len(saddles.Wj.get(j, ())) for j in (1, 2, 3)}
    return (Fraction(1, 2) * counts[1] + Fraction(2, 3) * counts[2]
            + Fraction(3, 4) * counts[3])


def predicted_p(model: IsingModel, info: IsingConfigInfo, successor: str,
                saddles: SaddleSets | None = None) -> Fraction:
    """Closed-form jump probability to a successor configuration."""
    if saddles is None:
        saddles = saddle_sets(model, classify(model, info.config)
                              if not isinstance(info, IsingConfigInfo) else info)
    ell, n0 = info.ell, model.n0
    if successor not in saddles.S:
        return Fraction(0)
    if ell == 2 <= n0:
        denom = 2 * Fraction(info.Nr) + Fraction(8, 3) * info.Ns
        return (Fraction(8, 3) if successor in saddles.Ss else Fraction(1)) / denom
    if 3 <= ell <= n0:
        denom = Fraction(2 * info.Nr + 4 * info.Ns)
        return (Fraction(4) if successor in saddles.Ss else Fraction(1)) / denom
    weights = saddles.W_by_target
    num = sum(Fraction(j, j + 1) * weights[successor].get(j, 0) for j in (1, 2, 3))
    den = sum(Fraction(j, j + 1) * len(saddles.Wj.get(j, ())) for j in (1, 2, 3))
    return num / den


def minus_one_saddles(model: IsingModel):
    """Protocritical droplets: an (n0+1) x n0 rectangle plus a protuberance
    on a side of length n0+1; returns (corner-adjacent, interior) config sets."""
    L, n0 = model.L, model.n0
    if n0 + 1 >= L:
        raise errors.NotApplicable(
            f"the (n0+1) x n0 critical rectangle does not fit properly on "
            f"a torus of side {L}")
    base = minus_one(L)
    w1, w2 = set(), set()
    for r0 in range(L):
        for c0 in range(L):
            for hh, ww in ((n0 + 1, n0), (n0, n0 + 1)):
                cells = [((r0 + dr) % L) * L + (c0 + dc) % L
                         for dr in range(hh) for dc in range(ww)]
                rect = _flip_cells(base, cells, "+")
                if hh == n0 + 1:          # long sides are the two columns
                    for cc in ((c0 - 1) % L, (c0 + ww) % L):
                        for k in range(hh):
                            cfg = _flip(rect, ((r0 + k) % L) * L + cc)
                            (w1 if k in (0, hh - 1) else w2).add(cfg)
                else:                     # long sides are the two rows
                    for rr in ((r0 - 1) % L, (r0 + hh) % L):
                        for k in range(ww):
                            cfg = _flip(rect, rr * L + (c0 + k) % L)
                            (w1 if k in (0, ww - 1) else w2).add(cfg)
    return frozenset(w1), frozenset(w2 - w1)


def theta_minus_one(model: IsingModel) -> Fraction:
    w1, w2 = minus_one_saddles(model)
    return Fraction(1, 2) * len(w1) + Fraction(2, 3) * len(w2)


def nucleation_exponent(model: IsingModel) -> Fraction:
    """c(h) = 4 (n0+1) - h ((n0+1) n0 + 1)."""
    n0 = model.n0
    return 4 * Fraction(n0 + 1) - model.h * ((n0 + 1) * n0 + 1)


def time_scale_table(model: IsingModel):
    """Predicted exit exponents per level: k h for k < n0, then 2-h, then c(h)."""
    rows = [(k, Fraction(k) * model.h) for k in range(1, model.n0)]
    rows.append((model.n0, 2 - model.h))
    rows.append((model.n0 + 1, nucleation_exponent(model)))
    return rows


def enumerate_omega_o(model: IsingModel, chain: Chain):
    out = []
    for s in chain.states:
        info = classify(model, s)
        if info.in_omega_o:
            out.append(info)
    return out


def verify_lemma_t01(model: IsingModel, chain: Chain, mu, bneck_index,
                     omega_infos=None):
    """Engine bottleneck exponents against the closed-form exit exponents.

    Returns one record per Omega_o configuration; disagreements are data
    (the closed forms assume the large-torus regime).
    """
    L = model.L
    if omega_infos is None:
        omega_infos = enumerate_omega_o(model, chain)
    omega_set = {info.config for info in omega_infos}
    records = []
    for info in omega_infos:
        config = info.config
        if config == minus_one(L):
            expected = 8 - 3 * model.h
        elif config == plus_one(L):
            expected = 8 + 3 * model.h
        elif info.ell <= model.n0:
            expected = (info.ell - 1) * model.h
        else:
            expected = 2 - model.h
        value = bneck_index.query_order({config}, omega_set - {config})
        engine = value.order - mu.mu[config].order
        records.append({
            "config": config, "ell": info.ell,
            "predicted_exponent": expected,
            "engine_exponent": engine,
            "match": engine == expected,
            "in_regime": model.in_regime,
        })
    return records
