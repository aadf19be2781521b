"""Exact metastable hierarchy of reversible finite-state Markov chains.

The jump rates are positive monomials in a small parameter; all leading-order
arithmetic is exact rational.  The package computes stationary measures,
trace chains, capacities, the full metastable hierarchy (time scales,
metastable sets, limiting rates), generates low-temperature Ising/Glauber
chains for validation, and ships a finite-parameter Monte Carlo simulator.
"""

from .scale import (Comparison, ScaleBasis, ScaledQuantity, ZERO, INFINITE,
                    sq, compare, limit_ratio)
from .chain import (Chain, Conductance, StationaryMeasure, build_chain,
                    conductances, stationary_measure)
from .trace import (TraceChain, HittingLimit, average_rate, eliminate_state,
                    hitting_limit, trace_onto)
from .capacity import (BottleneckResult, BottleneckIndex, SharpCapacity,
                       bottleneck, sharp_capacity, union_bottleneck_identity)

__version__ = "0.1.0"
