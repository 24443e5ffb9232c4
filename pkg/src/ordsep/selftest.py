"""Built-in checks run by ``ordsep selftest``."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .bh import BhSpec, bh_joint_pmf_occupancy, bh_joint_pmf_separation
from .distributions import PiecewiseLinear, TwoSidedZTest, Uniform
from .engine import SeparationEvent, TwoPopulationModel, cdf_orderstats_conditioned, separation_probability

REF_ALT = TwoSidedZTest(mu0=0.0, muA=1.0, sigma=1.0, N=5)
REFERENCE_VALUES = {0: 0.472982, 1: 0.00978051}


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def random_pwl(rng: random.Random, knots: int = 4) -> PiecewiseLinear:
    """Random strictly increasing piecewise-linear CDF on [0, 1]."""
    xs = sorted(rng.uniform(0.01, 0.99) for _ in range(knots))
    ps = sorted(rng.uniform(0.0, 1.0) for _ in range(knots))
    return PiecewiseLinear(((0.0, 0.0), *zip(xs, ps), (1.0, 1.0)))


def two_variable_identities(trials: int = 100, seed: int = 2007, tol: float = 1e-10) -> Check:
    """Two variables, one per population: A = beta + gamma and the closed form
    F1(b1)[1 - F2(b2)] + [1 - F1(b2)] F2(b1)."""
    rng = random.Random(seed)
    worst = 0.0
    for _ in range(trials):
        f1, f2 = random_pwl(rng), random_pwl(rng)
        b1, b2 = sorted(rng.uniform(0.02, 0.98) for _ in range(2))
        model = TwoPopulationModel(2, 1, f1, f2)
        event = SeparationEvent(((0.0, b1), (b2, 1.0)), (1, 1))
        beta = separation_probability(model, event, 1)
        gamma = separation_probability(model, event, 0)
        total = separation_probability(model, event)
        via_cdfs = cdf_orderstats_conditioned(model, [(1, b1)]) - cdf_orderstats_conditioned(
            model, [(1, b1), (2, b2)]
        )
        closed = f1.cdf(b1) * (1 - f2.cdf(b2)) + (1 - f1.cdf(b2)) * f2.cdf(b1)
        worst = max(
            worst,
            abs(total - (beta + gamma)),
            abs(total - closed),
            abs(via_cdfs - closed),
            abs(beta - f1.cdf(b1) * (1 - f2.cdf(b2))),
            abs(gamma - (1 - f1.cdf(b2)) * f2.cdf(b1)),
        )
    return Check("two-variable identities", worst <= tol, f"{trials} trials, max error {worst:.3g} (tol {tol:g})")


def reference_reproduction(tol: float = 1e-5) -> list[Check]:
    spec = BhSpec(2, 1, 0.05, REF_ALT)
    checks = []
    for name, pmf in (("occupancy", bh_joint_pmf_occupancy(spec)), ("separation", bh_joint_pmf_separation(spec))):
        for j, expected in REFERENCE_VALUES.items():
            got = float(pmf.table[1, j])
            checks.append(
                Check(
                    f"BH m=2 n=1 Pr(R=1,V={j}) [{name}]",
                    abs(got - expected) <= tol,
                    f"{got:.8g} vs {expected} (tol {tol:g})",
                )
            )
    model = TwoPopulationModel(2, 1, Uniform(), REF_ALT)
    event = SeparationEvent(((0.0, 0.025), (0.05, 1.0)), (1, 1))
    for j, expected in REFERENCE_VALUES.items():
        got = separation_probability(model, event, j)
        checks.append(
            Check(f"separation event j={j}", abs(got - expected) <= tol, f"{got:.8g} vs {expected} (tol {tol:g})")
        )
    return checks


def run_all() -> list[Check]:
    return [two_variable_identities(), *reference_reproduction()]
