"""Benjamini-Hochberg step-up procedure: exact joint law of (R, V).

``R`` is the number of rejections and ``V`` the number of rejected true
nulls.  Null p-values are uniform; the ``m - n`` alternative p-values share
the law ``alt``.  Two exact algorithms are provided and must agree:

* :func:`bh_joint_pmf_occupancy` sums the product-multinomial mass of every
  cell occupancy pattern of the threshold grid;
* :func:`bh_joint_pmf_separation` splits each ``{R = k}`` into separation
  events and evaluates them with the inclusion-exclusion engine.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .distributions import CdfModel, Uniform, format_model, parse_model
from .engine import SeparationEvent, TwoPopulationModel, separation_probability_by_j
from .errors import SizeGuardError, ValidationError

__all__ = [
    "BhSpec",
    "JointPmf",
    "bh_thresholds",
    "bh_reject_count",
    "bh_reject_counts",
    "bh_joint_pmf_occupancy",
    "bh_joint_pmf_separation",
    "bh_rejection_events",
    "derived_summaries",
    "OCCUPANCY_MAX_M",
    "SEPARATION_MAX_M",
]

OCCUPANCY_MAX_M = 12
SEPARATION_MAX_M = 8


def bh_thresholds(m: int, alpha: float) -> np.ndarray:
    """Step-up critical values ``(alpha/m, 2 alpha/m, ..., alpha)``."""
    if int(m) != m or m < 1:
        raise ValidationError(f"m must be a positive integer, got {m!r}")
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha!r}")
    return np.array([k * alpha / m for k in range(1, m + 1)])


def bh_reject_count(pvalues, thresholds) -> int:
    """Largest ``k`` with ``y_k <= b_k`` for the sorted p-values ``y`` (0 if none)."""
    p = np.sort(np.asarray(pvalues, dtype=float))
    b = np.asarray(thresholds, dtype=float)
    if p.shape != b.shape:
        raise ValidationError(f"{p.size} p-values but {b.size} thresholds")
    hits = np.nonzero(p <= b)[0]
    return int(hits[-1] + 1) if hits.size else 0


def bh_reject_counts(pvalues: np.ndarray, thresholds) -> np.ndarray:
    """Row-wise :func:`bh_reject_count` for a 2-D array of p-values."""
    p = np.sort(np.asarray(pvalues, dtype=float), axis=1)
    b = np.asarray(thresholds, dtype=float)
    if p.shape[1] != b.size:
        raise ValidationError(f"{p.shape[1]} p-values per row but {b.size} thresholds")
    ok = p <= b
    last = b.size - np.argmax(ok[:, ::-1], axis=1)
    return np.where(ok.any(axis=1), last, 0)


@dataclass(frozen=True)
class BhSpec:
    """``m`` hypotheses, the first ``n`` true nulls, FDR level ``alpha``."""

    m: int
    n: int
    alpha: float
    alt: CdfModel = field(default_factory=Uniform)

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValidationError(f"m must be a positive integer, got {self.m!r}")
        if int(self.n) != self.n or not 0 <= self.n <= self.m:
            raise ValidationError(f"n must satisfy 0 <= n <= m={self.m}, got {self.n!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError(f"alpha must lie in (0, 1), got {self.alpha!r}")

    @property
    def thresholds(self) -> np.ndarray:
        return bh_thresholds(self.m, self.alpha)

    @property
    def model(self) -> TwoPopulationModel:
        return TwoPopulationModel(self.m, self.n, Uniform(), self.alt)


@dataclass
class JointPmf:
    """``table[k, j] = Pr(R = k, V = j)``, shape ``(m + 1, n + 1)``."""

    table: np.ndarray
    spec: BhSpec
    algorithm: str = ""

    def check(self, atol: float = 1e-10) -> None:
        """Raise ``ValidationError`` if the table breaks a support or mass rule."""
        m, n = self.spec.m, self.spec.n
        t = self.table
        if t.shape != (m + 1, n + 1):
            raise ValidationError(f"table shape {t.shape} != {(m + 1, n + 1)}")
        if np.any(t < 0):
            raise ValidationError("negative probability in table")
        if abs(t.sum() - 1.0) > atol:
            raise ValidationError(f"table sums to {t.sum()!r}")
        for k in range(m + 1):
            for j in range(n + 1):
                if (j > k or k - j > m - n) and t[k, j] != 0.0:
                    raise ValidationError(f"mass {t[k, j]!r} outside support at (k={k}, j={j})")

    def rows(self) -> Iterator[tuple[int, int, float]]:
        for k in range(self.table.shape[0]):
            for j in range(self.table.shape[1]):
                yield k, j, float(self.table[k, j])

    def to_csv(self, digits: int = 6) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "j", "prob"])
        for k, j, p in self.rows():
            w.writerow([k, j, format(p, f".{digits}g")])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {
                "m": self.spec.m,
                "n": self.spec.n,
                "alpha": self.spec.alpha,
                "alt": format_model(self.spec.alt),
                "algorithm": self.algorithm,
                "table": self.table.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "JointPmf":
        obj = json.loads(text)
        try:
            spec = BhSpec(obj["m"], obj["n"], obj["alpha"], parse_model(obj["alt"]))
            table = np.array(obj["table"], dtype=float)
        except KeyError as exc:
            raise ValidationError(f"JointPmf JSON missing key {exc}") from None
        return cls(table, spec, obj.get("algorithm", ""))

    def __eq__(self, other):
        if not isinstance(other, JointPmf):
            return NotImplemented
        return (
            self.spec == other.spec
            and self.algorithm == other.algorithm
            and self.table.shape == other.table.shape
            and bool(np.all(self.table == other.table))
        )


def _cell_masses(spec: BhSpec) -> tuple[list[float], list[float]]:
    edges = [0.0, *spec.thresholds.tolist(), 1.0]
    null, alt = Uniform(), spec.alt
    dF = [max(0.0, null.cdf(b) - null.cdf(a)) for a, b in zip(edges, edges[1:])]
    dG = [max(0.0, alt.cdf(b) - alt.cdf(a)) for a, b in zip(edges, edges[1:])]
    return dF, dG


def bh_joint_pmf_occupancy(spec: BhSpec) -> JointPmf:
    """Exact ``Pr(R = k, V = j)`` from the cell-occupancy law.

    The ``m + 1`` cells are cut by the BH thresholds.  Occupancy patterns are
    summed cell by cell, grouping patterns that agree on the running totals,
    the running first-population count and the current ``(R, V)`` candidate;
    every pattern's product-multinomial mass is counted exactly once.
    """
    m, n = spec.m, spec.n
    if m > OCCUPANCY_MAX_M:
        raise SizeGuardError(
            f"occupancy path limited to m <= {OCCUPANCY_MAX_M}; m={m} has "
            f"{math.comb(n + m, m) * math.comb(2 * m - n, m):.3g} occupancy patterns over {m + 1} cells"
        )
    dF, dG = _cell_masses(spec)
    inv_fact = [1.0 / math.factorial(k) for k in range(m + 1)]
    powF = [[d**k * inv_fact[k] for k in range(n + 1)] for d in dF]
    powG = [[d**k * inv_fact[k] for k in range(m - n + 1)] for d in dG]

    # state: (total so far, nulls so far, R candidate, V candidate) -> mass
    states: dict[tuple[int, int, int, int], float] = {(0, 0, 0, 0): 1.0}
    for cell in range(m + 1):
        k = cell + 1  # threshold index closing this cell (m + 1: the tail cell)
        nxt: dict[tuple[int, int, int, int], float] = defaultdict(float)
        for (t, u, r, v), mass in states.items():
            for lam in range(n - u + 1):
                if cell == m and lam != n - u:
                    continue
                wl = mass * powF[cell][lam]
                if wl == 0.0:
                    continue
                alt_done = t - u
                for mu in range(m - n - alt_done + 1):
                    if cell == m and mu != m - n - alt_done:
                        continue
                    w = wl * powG[cell][mu]
                    if w == 0.0:
                        continue
                    t2, u2 = t + lam + mu, u + lam
                    if k <= m and t2 >= k:
                        key = (t2, u2, k, u2)
                    else:
                        key = (t2, u2, r, v)
                    nxt[key] += w
        states = nxt

    scale = float(math.factorial(n) * math.factorial(m - n))
    cells: dict[tuple[int, int], list[float]] = defaultdict(list)
    for (_, _, r, v), mass in sorted(states.items()):
        cells[(r, v)].append(mass * scale)
    table = np.zeros((m + 1, n + 1))
    for (r, v), masses in cells.items():
        table[r, v] = math.fsum(masses)
    return JointPmf(table, spec, "occupancy")


def bh_rejection_events(m: int, alpha: float, k: int) -> Iterator[SeparationEvent]:
    """Disjoint separation events whose union is ``{R = k}``.

    On ``{R = k}`` exactly ``k`` p-values lie below ``b_k`` and for every
    ``l > k`` at most ``l - 1`` lie below ``b_l``.  Each event fixes how many
    p-values fall in every gap ``(b_l, b_{l+1})`` and in ``(b_m, 1)``.  Empty
    interior intervals are dropped; the first and last are kept so the event
    still starts at 0 and ends at 1.
    """
    b = [0.0, *bh_thresholds(m, alpha).tolist()]
    gaps = m - k + 1  # (b_k, b_{k+1}), ..., (b_{m-1}, b_m), (b_m, 1)
    counts = [0] * gaps

    def rec(g: int, below: int):
        # below = number of p-values <= b_{k+g}
        if g == gaps - 1:
            counts[g] = m - below
            yield list(counts)
            return
        l_next = k + g + 1
        for c in range(0, l_next - 1 - below + 1):
            counts[g] = c
            yield from rec(g + 1, below + c)

    for gap_counts in rec(0, k):
        intervals = []
        ks = []
        if k >= 1:
            intervals.append((0.0, b[k]))
            ks.append(k)
        for g, c in enumerate(gap_counts):
            lo = b[k + g]
            hi = b[k + g + 1] if k + g + 1 <= m else 1.0
            intervals.append((lo, hi))
            ks.append(c)
        keep = [q for q in range(len(ks)) if ks[q] > 0 or q == 0 or q == len(ks) - 1]
        yield SeparationEvent(tuple(intervals[q] for q in keep), tuple(ks[q] for q in keep))


def bh_joint_pmf_separation(spec: BhSpec, *, method: str = "factorized") -> JointPmf:
    """Exact ``Pr(R = k, V = j)`` by summing separation-event probabilities.

    ``method`` selects how each conditioned CDF is evaluated (see
    :func:`ordsep.engine.cdf_orderstats_conditioned`).
    """
    m, n = spec.m, spec.n
    if m > SEPARATION_MAX_M:
        n_events = sum(1 for k in range(m + 1) for _ in bh_rejection_events(m, spec.alpha, k))
        raise SizeGuardError(
            f"separation path limited to m <= {SEPARATION_MAX_M}; m={m} decomposes into "
            f"{n_events} events, each with up to 2^{m} inclusion-exclusion terms"
        )
    model = spec.model
    parts: list[list[list[float]]] = [[[] for _ in range(n + 1)] for _ in range(m + 1)]
    for k in range(m + 1):
        for event in bh_rejection_events(m, spec.alpha, k):
            by_j = separation_probability_by_j(model, event, method=method)
            if k == 0:
                # first interval (0, b_1) is empty, so V = 0
                parts[0][0].append(float(by_j.sum()))
            else:
                for j, p in enumerate(by_j):
                    parts[k][j].append(float(p))
    table = np.array([[math.fsum(c) for c in row] for row in parts])
    return JointPmf(table, spec, "separation")


def derived_summaries(pmf: JointPmf) -> dict[str, float]:
    """Expectations of common error-rate and power quantities under ``pmf``.

    Keys: ``expected_R``, ``expected_V``, ``fdr`` (E[V / max(R, 1)]),
    ``fwer`` (Pr(V >= 1)), ``expected_true_rejections`` (E[R - V]),
    ``average_power`` (E[(R - V) / (m - n)], 0 when there are no alternatives)
    and ``any_power`` (Pr(R - V >= 1)).
    """
    t = pmf.table
    m, n = pmf.spec.m, pmf.spec.n
    k = np.arange(t.shape[0])[:, None]
    j = np.arange(t.shape[1])[None, :]
    true_rej = k - j
    return {
        "expected_R": float(np.sum(t * k)),
        "expected_V": float(np.sum(t * j)),
        "fdr": float(np.sum(t * j / np.maximum(k, 1))),
        "fwer": float(np.sum(t * (j >= 1))),
        "expected_true_rejections": float(np.sum(t * np.clip(true_rej, 0, None))),
        "average_power": float(np.sum(t * np.clip(true_rej, 0, None)) / (m - n)) if m > n else 0.0,
        "any_power": float(np.sum(t * (true_rej >= 1))),
    }
