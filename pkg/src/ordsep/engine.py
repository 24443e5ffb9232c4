"""Exact probabilities for order statistics pooled from two populations.

``n`` variables follow the CDF ``F`` (first population) and ``m - n`` follow
``G`` (second population), all independent.  The main entry points are

* :func:`cdf_orderstats_conditioned` -- joint CDF of selected order
  statistics, optionally jointly with "exactly ``j`` first-population values
  lie below the smallest query value";
* :func:`separation_probability` -- probability that exactly ``k_q`` order
  statistics land in each of a list of ordered intervals, via
  inclusion-exclusion over the lower interval bounds;
* :func:`occupancy_event_probability` -- brute-force product-multinomial sum,
  used as an independent oracle.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .distributions import CdfModel
from .enumeration import OrderStatQuery, enumerate_index_vectors, enumerate_lambda
from .errors import ValidationError

__all__ = [
    "TwoPopulationModel",
    "SeparationEvent",
    "cdf_orderstats_conditioned",
    "separation_probability",
    "separation_probability_by_j",
    "occupancy_event_probability",
    "separation_oracle",
    "validate_condition",
    "EXACT_COEFFICIENT_LIMIT",
    "METHODS",
]

# multinomial coefficients are exact integers up to this m, log-gamma above
EXACT_COEFFICIENT_LIMIT = 20


@dataclass(frozen=True)
class TwoPopulationModel:
    """``n`` draws from ``F`` followed by ``m - n`` draws from ``G``."""

    m: int
    n: int
    F: CdfModel
    G: CdfModel

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValidationError(f"m must be a positive integer, got {self.m!r}")
        if int(self.n) != self.n or not 0 <= self.n <= self.m:
            raise ValidationError(f"n must satisfy 0 <= n <= m={self.m}, got {self.n!r}")


@dataclass(frozen=True)
class SeparationEvent:
    """Exactly ``counts[q]`` order statistics fall in ``intervals[q]``.

    Intervals are open, ordered and may touch: ``0 = c_1 < d_1 <= c_2 < ... < d_s = 1``.
    """

    intervals: tuple
    counts: tuple

    def __post_init__(self):
        object.__setattr__(self, "intervals", tuple((float(c), float(d)) for c, d in self.intervals))
        object.__setattr__(self, "counts", tuple(int(k) for k in self.counts))

    @property
    def s(self) -> int:
        return len(self.intervals)

    def validate(self, m: int) -> None:
        if self.s == 0:
            raise ValidationError("event needs at least one interval")
        if len(self.counts) != self.s:
            raise ValidationError(f"{self.s} intervals but {len(self.counts)} counts")
        if self.intervals[0][0] != 0.0:
            raise ValidationError("first interval must start at 0")
        if self.intervals[-1][1] != 1.0:
            raise ValidationError("last interval must end at 1")
        prev_d = 0.0
        for q, (c, d) in enumerate(self.intervals):
            if not c < d:
                raise ValidationError(f"interval {q + 1} is empty: ({c}, {d})")
            if c < prev_d:
                raise ValidationError(f"interval {q + 1} overlaps its predecessor")
            prev_d = d
        if any(k < 0 for k in self.counts):
            raise ValidationError("interval counts must be nonnegative")
        if sum(self.counts) != m:
            raise ValidationError(f"interval counts sum to {sum(self.counts)}, must equal m={m}")

    def lower_index(self, q: int) -> int:
        """Index of the smallest order statistic in interval ``q`` (0-based q)."""
        return 1 + sum(self.counts[:q])

    def upper_index(self, q: int) -> int:
        """Index of the largest order statistic in interval ``q`` (0-based q)."""
        return sum(self.counts[: q + 1])


def validate_condition(model: TwoPopulationModel, event: SeparationEvent, j: int | None) -> None:
    if j is None:
        return
    if int(j) != j or not 0 <= j <= min(model.n, event.counts[0]):
        raise ValidationError(
            f"j={j!r} must satisfy 0 <= j <= min(n={model.n}, k_1={event.counts[0]})"
        )


class _CellWeights:
    """Per-cell probability masses and power tables for one query."""

    def __init__(self, model: TwoPopulationModel, values: Sequence[float]):
        m, n = model.m, model.n
        edges = [0.0, *values, 1.0]
        f = [model.F.cdf(y) for y in edges]
        g = [model.G.cdf(y) for y in edges]
        self.dF = [max(0.0, b - a) for a, b in zip(f, f[1:])]
        self.dG = [max(0.0, b - a) for a, b in zip(g, g[1:])]
        self.powF = [[d**k for k in range(n + 1)] for d in self.dF]
        self.powG = [[d**k for k in range(m - n + 1)] for d in self.dG]
        self.m, self.n = m, n
        self.exact = m <= EXACT_COEFFICIENT_LIMIT
        if self.exact:
            self._fact = [math.factorial(k) for k in range(m + 1)]
        else:
            self._lfact = [math.lgamma(k + 1) for k in range(m + 1)]

    def dead(self, caps: Sequence[int]) -> bool:
        """True when some occupied cell carries no probability mass."""
        return any(c and self.dF[a] == 0.0 and self.dG[a] == 0.0 for a, c in enumerate(caps))

    def term(self, caps: Sequence[int], lam: Sequence[int]) -> float:
        p = 1.0
        for a, (c, l) in enumerate(zip(caps, lam)):
            p *= self.powF[a][l] * self.powG[a][c - l]
        if p == 0.0:
            return 0.0
        n, mn = self.n, self.m - self.n
        if self.exact:
            fact = self._fact
            den_f = 1
            den_g = 1
            for c, l in zip(caps, lam):
                den_f *= fact[l]
                den_g *= fact[c - l]
            coef = (fact[n] // den_f) * (fact[mn] // den_g)
            return float(coef) * p
        lf = self._lfact
        log_coef = lf[n] + lf[mn] - sum(lf[l] + lf[c - l] for c, l in zip(caps, lam))
        return math.exp(log_coef) * p


def _caps(i: Sequence[int]) -> list[int]:
    return [b - a for a, b in zip(i, i[1:])]


METHODS = ("enumerate", "factorized")


def _check_method(method: str) -> None:
    if method not in METHODS:
        raise ValidationError(f"method must be one of {METHODS}, got {method!r}")


def cdf_orderstats_conditioned(
    model: TwoPopulationModel,
    query: OrderStatQuery,
    j: int | None = None,
    *,
    method: str = "enumerate",
) -> float:
    """Joint CDF of selected order statistics, optionally jointly with ``B_j``.

    ``B_j`` is the event that exactly ``j`` first-population values fall below
    the smallest query value.  Query pairs need not be sorted.

    ``method="enumerate"`` sums one product-multinomial term per admissible
    ``(i, lambda)`` pair with exact integer coefficients; ``"factorized"``
    accumulates the same sum cell by cell and is much faster for long queries.
    """
    query = query if isinstance(query, OrderStatQuery) else OrderStatQuery(tuple(query))
    m, n = model.m, model.n
    query.validate(m)
    _check_method(method)
    if j is not None and (int(j) != j or not 0 <= j <= n):
        raise ValidationError(f"j={j!r} must satisfy 0 <= j <= n={n}")
    if method == "factorized":
        by_first = _cdf_by_first_cell_factorized(model, query)
        total = math.fsum(by_first) if j is None else by_first[j]
        return min(1.0, max(0.0, total))
    values, _ = query.positions()
    w = _CellWeights(model, values)
    terms = []
    for i in enumerate_index_vectors(query, m):
        caps = _caps(i)
        # capacity pruning: cell 1 must hold j nulls and the rest n - j
        if j is not None and not (j <= caps[0] and caps[0] - j <= m - n and m - caps[0] >= n - j):
            continue
        if w.dead(caps):
            continue
        for lam in enumerate_lambda(i, n, j):
            terms.append(w.term(caps, lam))
    return min(1.0, max(0.0, math.fsum(terms)))


@functools.lru_cache(maxsize=64)
def _lower_toeplitz_index(size: int) -> tuple[np.ndarray, np.ndarray]:
    r, c = np.indices((size, size))
    return np.clip(r - c, 0, size - 1), r >= c


@functools.lru_cache(maxsize=4096)
def _cell_factor(mass: float, size: int) -> np.ndarray:
    """Lower-triangular Toeplitz matrix of ``mass**k / k!`` for ``k < size``.

    Cached: the same cell recurs across inclusion-exclusion terms.
    """
    coefs = np.array([mass**k / math.factorial(k) for k in range(size)])
    idx, lower = _lower_toeplitz_index(size)
    out = np.where(lower, coefs[idx], 0.0)
    out.flags.writeable = False
    return out


def _cdf_by_first_cell_factorized(model: TwoPopulationModel, query: OrderStatQuery) -> list[float]:
    """Same sum as the enumeration, accumulated one cell at a time.

    ``W[j, s, u]`` holds the summed weight of all partial assignments with
    ``j`` first-population variables in cell 1, and ``s`` second-population
    and ``u`` first-population variables in the cells seen so far.  A cell
    adds ``mu`` and ``lam`` with weight ``dG^mu/mu! * dF^lam/lam!``, i.e. the
    transfer is ``T_G @ W @ T_F.T`` with lower-triangular Toeplitz factors.
    The position bound ``i_a >= n_a`` masks states with ``s + u < n_a``.
    """
    m, n = model.m, model.n
    values, bounds = query.positions()
    if any(b > m for b in bounds):
        return [0.0] * (n + 1)
    w = _CellWeights(model, values)
    cells = len(values) + 1
    total = np.add.outer(np.arange(m - n + 1), np.arange(n + 1))

    def factors(a: int) -> tuple[np.ndarray, np.ndarray]:
        return _cell_factor(w.dG[a], m - n + 1), _cell_factor(w.dF[a], n + 1)

    TG, TF = factors(0)
    W = np.zeros((n + 1, m - n + 1, n + 1))
    for jj in range(n + 1):
        W[jj, :, jj] = TG[:, 0] * TF[jj, 0]
    for a in range(cells):
        if a > 0:
            TG, TF = factors(a)
            W = TG @ W @ TF.T
        if a < cells - 1:
            W[:, total < bounds[a]] = 0.0
    scale = float(math.factorial(n) * math.factorial(m - n))
    return [float(v) * scale for v in W[:, m - n, n]]


def _cdf_by_first_cell(model: TwoPopulationModel, query: OrderStatQuery) -> list[float]:
    """Conditioned CDF for every ``j = 0..n`` in a single enumeration pass."""
    m, n = model.m, model.n
    values, _ = query.positions()
    w = _CellWeights(model, values)
    buckets: list[list[float]] = [[] for _ in range(n + 1)]
    for i in enumerate_index_vectors(query, m):
        caps = _caps(i)
        if w.dead(caps):
            continue
        for lam in enumerate_lambda(i, n):
            buckets[lam[0]].append(w.term(caps, lam))
    return [math.fsum(b) for b in buckets]


def _inclusion_exclusion_terms(model: TwoPopulationModel, event: SeparationEvent, exhaustive: bool):
    """Yield ``(sign, query, vanishing)`` for each inclusion-exclusion term.

    The first query pair is always ``d_1`` (index 0 when ``k_1 == 0``) so the
    first cell is ``(0, d_1)``, which is what the ``j`` condition pins.
    """
    m = model.m
    base = [(event.upper_index(0), event.intervals[0][1])]
    for q in range(1, event.s):
        idx = event.upper_index(q)
        if idx >= 1:
            base.append((idx, event.intervals[q][1]))
    # a lower bound on Y_{m+1} is vacuous: that interval never enters the union
    lowers = [q for q in range(event.s) if event.lower_index(q) <= m]
    for size in range(len(lowers) + 1):
        for subset in itertools.combinations(lowers, size):
            vanishing = any(event.intervals[r][0] == 0.0 for r in subset)
            if vanishing and not exhaustive:
                continue
            pairs = base + [(event.lower_index(r), event.intervals[r][0]) for r in subset]
            yield (-1) ** size, OrderStatQuery(tuple(pairs)), vanishing


def separation_probability(
    model: TwoPopulationModel,
    event: SeparationEvent,
    j: int | None = None,
    *,
    exhaustive: bool = False,
    method: str = "enumerate",
) -> float:
    """``Pr(E and B_j)``: exactly ``counts[q]`` order statistics in each interval.

    With ``j`` given, exactly ``j`` first-population values must lie below
    ``d_1``.  Terms whose query includes a lower bound at 0 are identically
    zero and skipped; ``exhaustive=True`` evaluates them and checks they vanish.
    """
    event.validate(model.m)
    validate_condition(model, event, j)
    terms = []
    for sign, query, vanishing in _inclusion_exclusion_terms(model, event, exhaustive):
        value = cdf_orderstats_conditioned(model, query, j, method=method)
        if vanishing:
            if value != 0.0:
                raise AssertionError(f"term with a zero lower bound evaluated to {value!r}")
            continue
        terms.append(sign * value)
    return min(1.0, max(0.0, math.fsum(terms)))


def separation_probability_by_j(
    model: TwoPopulationModel, event: SeparationEvent, *, method: str = "enumerate"
) -> np.ndarray:
    """``Pr(E and B_j)`` for ``j = 0..min(n, k_1)``; entries sum to ``Pr(E)``."""
    event.validate(model.m)
    _check_method(method)
    evaluate = _cdf_by_first_cell if method == "enumerate" else _cdf_by_first_cell_factorized
    jmax = min(model.n, event.counts[0])
    per_j: list[list[float]] = [[] for _ in range(jmax + 1)]
    for sign, query, _ in _inclusion_exclusion_terms(model, event, exhaustive=False):
        by_first = evaluate(model, query)
        for jj in range(jmax + 1):
            per_j[jj].append(sign * by_first[jj])
    return np.array([min(1.0, max(0.0, math.fsum(t))) for t in per_j])


def _compositions(total: int, cells: int) -> np.ndarray:
    """All nonnegative integer vectors of length ``cells`` summing to ``total``."""
    if cells == 0:
        return np.zeros((1 if total == 0 else 0, 0), dtype=np.int64)
    rows = []
    for bars in itertools.combinations(range(total + cells - 1), cells - 1):
        prev = -1
        row = []
        for b in bars:
            row.append(b - prev - 1)
            prev = b
        row.append(total + cells - 1 - prev - 1)
        rows.append(row)
    return np.array(rows, dtype=np.int64).reshape(len(rows), cells)


def _multinomial_weights(counts: np.ndarray, probs: Sequence[float]) -> np.ndarray:
    total = int(counts[0].sum()) if len(counts) else 0
    out = np.empty(len(counts))
    for r, row in enumerate(counts):
        coef = math.factorial(total)
        p = 1.0
        for k, q in zip(row, probs):
            coef //= math.factorial(int(k))
            p *= q ** int(k)
        out[r] = float(coef) * p
    return out


def occupancy_event_probability(
    model: TwoPopulationModel,
    thresholds: Sequence[float],
    predicate: Callable[[np.ndarray, np.ndarray], np.ndarray],
    *,
    block: int = 2_000_000,
) -> float:
    """Brute-force product-multinomial probability of a cell-count event.

    The thresholds cut [0, 1] into ``len(thresholds) + 1`` cells.  Every pair of
    first-population counts ``lam`` and second-population counts ``mu`` is
    enumerated; ``predicate(lam, mu)`` receives integer arrays whose last axis
    runs over cells (leading axes broadcast) and returns a boolean array.
    """
    t = [float(x) for x in thresholds]
    if any(not 0.0 < x < 1.0 for x in t) or any(b <= a for a, b in zip(t, t[1:])):
        raise ValidationError("thresholds must be strictly increasing inside (0, 1)")
    m, n = model.m, model.n
    edges = [0.0, *t, 1.0]
    cells = len(edges) - 1
    dF = [max(0.0, model.F.cdf(b) - model.F.cdf(a)) for a, b in zip(edges, edges[1:])]
    dG = [max(0.0, model.G.cdf(b) - model.G.cdf(a)) for a, b in zip(edges, edges[1:])]
    lam = _compositions(n, cells)
    mu = _compositions(m - n, cells)
    wl = _multinomial_weights(lam, dF)
    wm = _multinomial_weights(mu, dG)
    rows = max(1, block // max(1, len(mu) * cells))
    partial = []
    for start in range(0, len(lam), rows):
        stop = start + rows
        mask = np.asarray(predicate(lam[start:stop, None, :], mu[None, :, :]), dtype=bool)
        mask = np.broadcast_to(mask, (len(lam[start:stop]), len(mu)))
        partial.append(float(np.sum(np.outer(wl[start:stop], wm)[mask])))
    return math.fsum(partial)


def separation_oracle(model: TwoPopulationModel, event: SeparationEvent, j: int | None = None) -> float:
    """``Pr(E and B_j)`` by brute-force cell enumeration (independent of the
    inclusion-exclusion path)."""
    event.validate(model.m)
    validate_condition(model, event, j)
    cuts = sorted({v for c, d in event.intervals for v in (c, d)} - {0.0, 1.0})
    pos = {0.0: 0, 1.0: len(cuts) + 1}
    pos.update({v: a + 1 for a, v in enumerate(cuts)})
    spans = [(pos[c], pos[d]) for c, d in event.intervals]
    first_end = spans[0][1]

    def predicate(lam, mu):
        tot = lam + mu
        ok = np.ones(np.broadcast_shapes(lam.shape[:-1], mu.shape[:-1]), dtype=bool)
        for (lo, hi), k in zip(spans, event.counts):
            ok &= tot[..., lo:hi].sum(axis=-1) == k
        if j is not None:
            ok &= lam[..., :first_end].sum(axis=-1) == j
        return ok

    return occupancy_event_probability(model, cuts, predicate)
