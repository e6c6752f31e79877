"""Model heat-trace densities and the degeneracy upper bound.

For curvature eigenvalues a_1..a_n, rescaled time t and form degree q the
density is

    k^n (2 pi)^{-n} sum_{|J| = q} prod_{j in J} a_j / (e^{t a_j} - 1)
                                  prod_{j not in J} a_j / (1 - e^{-t a_j}),

with each factor replaced by 1/t when t a_j vanishes.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import EmptyRegimeWarning

ZERO_THRESHOLD = 1e-12


@dataclass(frozen=True)
class HeatDensityQuery:
    eigenvalues: tuple
    t: float
    q: int = 0
    k: float = 1

    def __post_init__(self):
        object.__setattr__(self, "eigenvalues", tuple(float(a) for a in np.atleast_1d(self.eigenvalues)))
        if not self.t > 0:
            raise ValueError("time must be positive")
        if not 0 <= self.q <= len(self.eigenvalues):
            raise ValueError("form degree must lie in 0..n")
        if self.k < 1:
            raise ValueError("tensor power must be at least 1")

    @property
    def n(self) -> int:
        return len(self.eigenvalues)


def _factor_in(a: float, t: float) -> float:
    """a e^{-t a} / (1 - e^{-t a}) = a / expm1(t a)."""
    if abs(t * a) < ZERO_THRESHOLD:
        return 1.0 / t
    return a / math.expm1(t * a) if t * a < 700 else 0.0


def _factor_out(a: float, t: float) -> float:
    """a / (1 - e^{-t a})."""
    if abs(t * a) < ZERO_THRESHOLD:
        return 1.0 / t
    return a / -math.expm1(-t * a) if -t * a < 700 else 0.0


def heat_trace_density(query: HeatDensityQuery) -> float:
    a, t, q, k = query.eigenvalues, query.t, query.q, query.k
    n = len(a)
    terms = []
    for subset in itertools.combinations(range(n), q):
        chosen = set(subset)
        terms.append(math.prod(_factor_in(a[j], t) if j in chosen else _factor_out(a[j], t)
                               for j in range(n)))
    return k ** n * (2 * math.pi) ** (-n) * math.fsum(terms)


def density(eigenvalues, t: float, q: int = 0, k: float = 1) -> float:
    return heat_trace_density(HeatDensityQuery(tuple(np.atleast_1d(eigenvalues)), t, q, k))


def _bound_functions():
    return (
        (lambda x: np.abs(x / -np.expm1(x)), True),
        (lambda x: np.abs(x * np.exp(x) / -np.expm1(x)), True),
        (lambda x: np.abs(1.0 / -np.expm1(x)), False),
        (lambda x: np.abs(np.exp(x) / -np.expm1(x)), False),
    )


@lru_cache(maxsize=None)
def heat_constant_C(samples: int = 1_000_001, far: float = 60.0) -> float:
    """Smallest C bounding the four auxiliary functions.

    The first two are taken on 0 < |x| <= 1, the last two on |x| > 1; each
    is maximized over a grid that contains the endpoints x = +-1, where the
    suprema sit (attained for the first pair, approached for the second).
    """
    inner = np.linspace(-1.0, 1.0, samples)
    inner = inner[inner != 0.0]
    outer = np.concatenate([np.linspace(-far, -1.0, samples // 2), np.linspace(1.0, far, samples // 2)])
    best = 0.0
    for f, on_inner in _bound_functions():
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            vals = f(inner if on_inner else outer)
        best = max(best, float(np.nanmax(vals[np.isfinite(vals)])))
    return best


def regime_set(eigenvalues, t: float) -> tuple:
    """Indices j with |a_j t| < 1."""
    return tuple(j for j, a in enumerate(np.atleast_1d(eigenvalues)) if abs(a * t) < 1.0)


def degeneracy_bound(eigenvalues, t: float, q: int = 0) -> float:
    """prod_{j in iota} C/t * prod_{j not in iota} C|a_j| with iota = {|a_j t| < 1}."""
    a = np.atleast_1d(np.asarray(eigenvalues, dtype=float))
    if not t > 1:
        raise ValueError("the degeneracy bound is stated for t > 1")
    if not 0 <= q <= len(a):
        raise ValueError("form degree must lie in 0..n")
    c = heat_constant_C()
    iota = set(regime_set(a, t))
    if not iota:
        warnings.warn("no eigenvalue satisfies |a t| < 1", EmptyRegimeWarning, stacklevel=2)
    return math.prod(c / t if j in iota else c * abs(a[j]) for j in range(len(a)))


def large_time_limit(eigenvalues, q: int = 0) -> float:
    """(2 pi)^{-n} |prod a_j| when exactly q eigenvalues are negative and none vanishes, else 0."""
    a = np.atleast_1d(np.asarray(eigenvalues, dtype=float))
    if np.any(a == 0) or int(np.count_nonzero(a < 0)) != q:
        return 0.0
    return (2 * math.pi) ** (-len(a)) * abs(float(np.prod(a)))


def heat_table(queries):
    """Rows (eigenvalues, t, q, density, bound, C) for the CLI."""
    c = heat_constant_C()
    rows = []
    for qry in queries:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", EmptyRegimeWarning)
            bound = degeneracy_bound(qry.eigenvalues, qry.t, qry.q) if qry.t > 1 else float("nan")
        rows.append((qry.eigenvalues, qry.t, qry.q, heat_trace_density(qry), bound, c))
    return rows
