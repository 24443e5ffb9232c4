import random

import pytest

from ordsep.distributions import PiecewiseLinear, TwoSidedZTest, Uniform
from ordsep.engine import SeparationEvent, TwoPopulationModel

REF_ALT = TwoSidedZTest(mu0=0.0, muA=1.0, sigma=1.0, N=5)

_acceptance_lines: list[str] = []


def random_pwl(rng: random.Random, knots: int | None = None, flat: bool = False) -> PiecewiseLinear:
    knots = knots if knots is not None else rng.randint(1, 5)
    xs = sorted(rng.uniform(0.01, 0.99) for _ in range(knots))
    ps = sorted(rng.uniform(0.0, 1.0) for _ in range(knots))
    if flat and knots >= 2:
        ps[1] = ps[0]
    return PiecewiseLinear(((0.0, 0.0), *zip(xs, ps), (1.0, 1.0)))


def random_cdf(rng: random.Random):
    kind = rng.choice(["uniform", "ztest", "pwl", "pwl"])
    if kind == "uniform":
        return Uniform()
    if kind == "ztest":
        return TwoSidedZTest(0.0, rng.uniform(-1.5, 1.5), rng.uniform(0.5, 2.0), rng.randint(1, 6))
    return random_pwl(rng, flat=rng.random() < 0.3)


def random_event(rng: random.Random, m: int, max_s: int | None = None) -> SeparationEvent:
    """Random event with touching and zero-count intervals mixed in."""
    s = rng.randint(1, max_s or m)
    cuts = sorted(rng.uniform(0.02, 0.98) for _ in range(2 * s - 2))
    bounds = [0.0, *cuts, 1.0]
    intervals = []
    for q in range(s):
        c, d = bounds[2 * q], bounds[2 * q + 1]
        intervals.append([c, d])
    for q in range(1, s):
        if rng.random() < 0.35:
            intervals[q][0] = intervals[q - 1][1]
    counts = [0] * s
    for _ in range(m):
        counts[rng.randrange(s)] += 1
    if rng.random() < 0.2:
        counts = [0] * s
        counts[-1] = m
    return SeparationEvent(tuple(map(tuple, intervals)), tuple(counts))


def random_instance(rng: random.Random, max_m: int = 6):
    m = rng.randint(1, max_m)
    n = rng.randint(0, m)
    model = TwoPopulationModel(m, n, random_cdf(rng), random_cdf(rng))
    return model, random_event(rng, m, max_s=min(m + 1, 5))


@pytest.fixture
def ref_model():
    return TwoPopulationModel(2, 1, Uniform(), REF_ALT)


@pytest.fixture
def ref_event():
    return SeparationEvent(((0.0, 0.025), (0.05, 1.0)), (1, 1))


@pytest.fixture
def acceptance_report():
    def record(number: int, passed: bool, detail: str):
        _acceptance_lines.append(f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}")
        print(_acceptance_lines[-1])

    return record


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
