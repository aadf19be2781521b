"""Finite-parameter continuous-time Monte Carlo, the statistical oracle.

Each sample owns a counter-based RNG stream keyed by (seed, sample index),
so runs are reproducible and samples are order-independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import errors
from .chain import Chain
from .scale import evaluate

__all__ = ["NumericChain", "ExitStatistics", "evaluate_chain", "simulate_exit"]

_SMALLEST_NORMAL = 2.2250738585072014e-308


@dataclass(frozen=True)
class NumericChain:
    states: tuple
    index: dict
    targets: dict          # state -> list of successor states
    rates: dict            # state -> np.ndarray of positive rates
    totals: dict           # state -> float


def evaluate_chain(chain: Chain, eps) -> NumericChain:
    """Evaluate every monomial rate at a concrete eps in (0, 1)."""
    eps = float(eps)
    if not 0 < eps < 1:
        raise errors.ModelError(f"eps must lie in (0, 1), got {eps}")
    targets = {}
    rates = {}
    totals = {}
    for x in chain.states:
        succ = sorted(chain.out_edges(x), key=chain.index.get)
        vals = np.array([evaluate(chain.rates[x][y], eps) for y in succ])
        for y, v in zip(succ, vals):
            if v < _SMALLEST_NORMAL:
                raise errors.Underflow(
                    f"rate {x!r}->{y!r} underflows at eps={eps}")
        targets[x] = succ
        rates[x] = vals
        totals[x] = float(vals.sum())
    return NumericChain(chain.states, dict(chain.index), targets, rates, totals)


@dataclass
class ExitStatistics:
    samples: int
    mean_exit: float
    cv: float
    hit_counts: dict       # target label -> count
    seed: int
    timeouts: int = 0
    exit_times: list = field(default_factory=list, repr=False)

    @property
    def hit_fractions(self):
        done = self.samples - self.timeouts
        return {k: v / done for k, v in self.hit_counts.items()} if done else {}


def simulate_exit(nc: NumericChain, start, target_sets, samples, seed,
                  step_budget=10 ** 6) -> ExitStatistics:
    """Simulate until some target set is hit; record time and which set.

    ``target_sets`` is a list of state sets; they are labelled by position.
    Exceeding the step budget is recorded, not fatal.
    """
    target_of = {}
    for label, group in enumerate(target_sets):
        for s in group:
            if s in target_of:
                raise errors.OverlappingSets(f"state {s!r} in two target sets")
            target_of[s] = label
    if start in target_of:
        raise errors.OverlappingSets("start state lies in a target set")
    if start not in nc.index:
        raise errors.ModelError(f"unknown start state {start!r}")

    times = []
    hits = {label: 0 for label in range(len(target_sets))}
    timeouts = 0
    for k in range(samples):
        rng = np.random.Generator(np.random.Philox(key=[seed, k]))
        state = start
        t = 0.0
        for _ in range(step_budget):
            total = nc.totals[state]
            t += rng.exponential(1.0 / total)
            u = rng.random() * total
            cum = np.cumsum(nc.rates[state])
            state = nc.targets[state][int(np.searchsorted(cum, u))]
            if state in target_of:
                hits[target_of[state]] += 1
                times.append(t)
                break
        else:
            timeouts += 1

    arr = np.array(times) if times else np.array([0.0])
    mean = float(arr.mean())
    cv = float(arr.std() / mean) if mean > 0 else 0.0
    return ExitStatistics(samples=samples, mean_exit=mean, cv=cv,
                          hit_counts=hits, seed=seed, timeouts=timeouts,
                          exit_times=list(times))
