"""Seeded Monte Carlo estimates used to check the exact results.

Replicates are drawn in fixed-size chunks.  Chunk ``c`` uses its own PCG64
stream seeded by ``SeedSequence(seed, spawn_key=(c,))``, so every chunk is
reproducible on its own and hit counts do not depend on how many workers
process the chunks.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .bh import BhSpec, bh_reject_counts
from .engine import SeparationEvent, TwoPopulationModel, validate_condition
from .errors import ValidationError

__all__ = ["SimConfig", "SimResult", "EmpiricalPmf", "simulate_event", "simulate_event_by_j", "simulate_bh"]


@dataclass(frozen=True)
class SimConfig:
    samples: int = 100_000
    seed: int = 0
    workers: int = 1
    chunk_size: int = 10_000

    def __post_init__(self):
        if int(self.samples) != self.samples or self.samples < 1:
            raise ValidationError(f"samples must be a positive integer, got {self.samples!r}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ValidationError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if self.workers < 1 or self.chunk_size < 1:
            raise ValidationError("workers and chunk_size must be positive")

    def chunks(self) -> list[tuple[int, int]]:
        """``(chunk index, replicate count)`` pairs covering ``samples``."""
        full, rest = divmod(self.samples, self.chunk_size)
        out = [(c, self.chunk_size) for c in range(full)]
        if rest:
            out.append((full, rest))
        return out

    def rng(self, chunk: int) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=(chunk,))))


@dataclass(frozen=True)
class SimResult:
    estimate: float
    standard_error: float
    hits: int
    samples: int

    @classmethod
    def from_hits(cls, hits: int, samples: int) -> "SimResult":
        p = hits / samples
        return cls(p, math.sqrt(p * (1.0 - p) / samples), int(hits), int(samples))

    def z_score(self, exact: float) -> float:
        """Standardised distance to ``exact``; uses the exact-value SE when the
        empirical SE is zero."""
        se = self.standard_error or math.sqrt(max(exact * (1 - exact), 0.0) / self.samples)
        if se == 0.0:
            return 0.0 if self.estimate == exact else math.inf
        return (self.estimate - exact) / se


def _run_chunks(config: SimConfig, fn: Callable[[np.random.Generator, int], np.ndarray]) -> np.ndarray:
    """Sum the integer count arrays returned by ``fn`` over all chunks."""
    tasks = config.chunks()

    def one(task):
        chunk, size = task
        return fn(config.rng(chunk), size)

    if config.workers == 1:
        parts = [one(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            parts = list(pool.map(one, tasks))
    return np.sum(parts, axis=0)


def _draw(model: TwoPopulationModel, rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
    first = np.asarray(model.F.sample(rng, (size, model.n)), dtype=float)
    second = np.asarray(model.G.sample(rng, (size, model.m - model.n)), dtype=float)
    return first, second


def _event_counts(model: TwoPopulationModel, event: SeparationEvent, config: SimConfig) -> np.ndarray:
    """Hit counts per ``j`` for ``E and B_j``, ``j = 0..min(n, k_1)``."""
    jmax = min(model.n, event.counts[0])
    d1 = event.intervals[0][1]

    def fn(rng, size):
        first, second = _draw(model, rng, size)
        pooled = np.concatenate([first, second], axis=1)
        ok = np.ones(size, dtype=bool)
        for (c, d), k in zip(event.intervals, event.counts):
            ok &= ((pooled > c) & (pooled < d)).sum(axis=1) == k
        below = (first < d1).sum(axis=1)
        return np.bincount(below[ok], minlength=model.n + 1)[: jmax + 1].astype(np.int64)

    return _run_chunks(config, fn)


def simulate_event(
    model: TwoPopulationModel, event: SeparationEvent, j: int | None, config: SimConfig
) -> SimResult:
    """Estimate ``Pr(E and B_j)`` (or ``Pr(E)`` when ``j`` is None)."""
    event.validate(model.m)
    validate_condition(model, event, j)
    counts = _event_counts(model, event, config)
    hits = int(counts.sum()) if j is None else int(counts[j])
    return SimResult.from_hits(hits, config.samples)


def simulate_event_by_j(model: TwoPopulationModel, event: SeparationEvent, config: SimConfig) -> list[SimResult]:
    """One :class:`SimResult` per ``j = 0..min(n, k_1)`` from a single run."""
    event.validate(model.m)
    counts = _event_counts(model, event, config)
    return [SimResult.from_hits(int(h), config.samples) for h in counts]


@dataclass
class EmpiricalPmf:
    """Histogram of ``(R, V)`` over simulated replicates."""

    counts: np.ndarray
    spec: BhSpec
    samples: int

    @property
    def table(self) -> np.ndarray:
        return self.counts / self.samples

    @property
    def standard_error(self) -> np.ndarray:
        p = self.table
        return np.sqrt(p * (1.0 - p) / self.samples)

    def cell(self, k: int, j: int) -> SimResult:
        return SimResult.from_hits(int(self.counts[k, j]), self.samples)


def simulate_bh(spec: BhSpec, config: SimConfig) -> EmpiricalPmf:
    """Run the BH procedure on simulated p-values and tabulate ``(R, V)``."""
    model = spec.model
    b = spec.thresholds
    b_with_zero = np.concatenate([[-np.inf], b])
    m, n = spec.m, spec.n

    def fn(rng, size):
        first, second = _draw(model, rng, size)
        r = bh_reject_counts(np.concatenate([first, second], axis=1), b)
        v = (first <= b_with_zero[r][:, None]).sum(axis=1)
        out = np.zeros((m + 1, n + 1), dtype=np.int64)
        np.add.at(out, (r, v), 1)
        return out

    return EmpiricalPmf(_run_chunks(config, fn), spec, config.samples)
