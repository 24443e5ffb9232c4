"""Constrained integer-vector iterators behind the conditioned order-statistic CDF.

Two streams are needed:

* cumulative-count vectors ``i = (0, i_1, ..., i_e, m)``: ``i_a`` is the number
  of variables at or below the ``a``-th query value, with ``i_a >= n_a``;
* per-cell first-population counts ``lambda`` compatible with a given ``i``.

Both are generated lazily in a fixed order so downstream sums are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

from .errors import ValidationError

__all__ = ["OrderStatQuery", "enumerate_index_vectors", "enumerate_lambda"]


@dataclass(frozen=True)
class OrderStatQuery:
    """Joint-CDF query ``Pr(Y_{n_1} <= y_1, ..., Y_{n_e} <= y_e)``.

    ``pairs`` holds ``(index, value)`` tuples in any order. Index 0 is allowed
    and means "no constraint": the value then only acts as a cell breakpoint.
    """

    pairs: tuple

    def __post_init__(self):
        pairs = tuple((int(k), float(y)) for k, y in self.pairs)
        object.__setattr__(self, "pairs", pairs)

    def validate(self, m: int) -> None:
        for k, y in self.pairs:
            if not 0 <= k <= m:
                raise ValidationError(f"order-statistic index {k} outside [0, {m}]")
            if not 0.0 <= y <= 1.0:
                raise ValidationError(f"query value {y!r} outside [0, 1]")

    def positions(self) -> tuple[list[float], list[int]]:
        """Distinct sorted values and the binding index bound at each.

        Tied values collapse to one position keeping the largest index, since
        ``Y_a <= y`` and ``Y_b <= y`` with ``a < b`` reduces to ``Y_b <= y``.
        """
        values: list[float] = []
        bounds: list[int] = []
        for k, y in sorted(self.pairs, key=lambda p: (p[1], p[0])):
            if values and values[-1] == y:
                bounds[-1] = max(bounds[-1], k)
            else:
                values.append(y)
                bounds.append(k)
        return values, bounds


def _index_vectors(bounds: Sequence[int], m: int) -> Iterator[tuple[int, ...]]:
    e = len(bounds)
    current = [0] * e

    def rec(a: int, prev: int):
        if a == e:
            yield (0, *current, m)
            return
        for v in range(max(prev, bounds[a]), m + 1):
            current[a] = v
            yield from rec(a + 1, v)

    return rec(0, 0)


def enumerate_index_vectors(query: OrderStatQuery, m: int) -> Iterator[tuple[int, ...]]:
    """Yield every cumulative-count vector admissible for ``query``.

    Vectors are ``(0, i_1, ..., i_e, m)`` over the distinct sorted query values,
    nondecreasing, with ``i_a`` at least the binding index at position ``a``.
    Order is lexicographic ascending.  An index above ``m`` makes the stream
    empty.
    """
    _, bounds = query.positions()
    if any(b > m for b in bounds):
        return iter(())
    return _index_vectors(bounds, m)


def enumerate_lambda(i: Sequence[int], n: int, j: int | None = None) -> Iterator[tuple[int, ...]]:
    """Yield first-population cell counts for the cumulative vector ``i``.

    Each result ``lam`` satisfies ``sum(lam) == n`` and
    ``0 <= lam[a] <= i[a+1] - i[a]``; when ``j`` is given, ``lam[0] == j``.
    Order is lexicographic descending.
    """
    caps = [b - a for a, b in zip(i, i[1:])]
    if any(c < 0 for c in caps):
        raise ValidationError(f"index vector {tuple(i)} is not nondecreasing")
    cells = len(caps)
    # suffix[a] = total capacity of cells a..end
    suffix = [0] * (cells + 1)
    for a in range(cells - 1, -1, -1):
        suffix[a] = suffix[a + 1] + caps[a]
    if n < 0 or n > suffix[0]:
        return
    lam = [0] * cells

    def rec(a: int, remaining: int):
        if a == cells:
            if remaining == 0:
                yield tuple(lam)
            return
        hi = min(caps[a], remaining)
        lo = max(0, remaining - suffix[a + 1])
        if a == 0 and j is not None:
            if not lo <= j <= hi:
                return
            lo = hi = j
        for v in range(hi, lo - 1, -1):
            lam[a] = v
            yield from rec(a + 1, remaining - v)

    yield from rec(0, n)
