import math
import random

import numpy as np
import pytest

from conftest import REF_ALT, random_cdf
from ordsep.bh import (
    BhSpec,
    JointPmf,
    bh_joint_pmf_occupancy,
    bh_joint_pmf_separation,
    bh_reject_count,
    bh_reject_counts,
    bh_rejection_events,
    bh_thresholds,
    derived_summaries,
)
from ordsep.distributions import Uniform
from ordsep.engine import SeparationEvent, occupancy_event_probability
from ordsep.errors import SizeGuardError, ValidationError
from ordsep.montecarlo import SimConfig, simulate_bh

REF_SPEC = BhSpec(2, 1, 0.05, REF_ALT)


def bh_predicate(m, n, k=None, j=None):
    """Occupancy predicate over cells cut at the BH thresholds (m + 1 cells)."""

    def pred(lam, mu):
        total = lam + mu
        cum = np.cumsum(total, axis=-1)[..., :m]  # count <= b_l, l = 1..m
        ls = np.arange(1, m + 1)
        ok = cum >= ls
        r = np.where(ok.any(axis=-1), m - np.argmax(ok[..., ::-1], axis=-1), 0)
        out = np.ones(r.shape, bool) if k is None else r == k
        if j is not None:
            null_cum = np.concatenate([np.zeros(lam.shape[:-1] + (1,), int), np.cumsum(lam, axis=-1)], axis=-1)
            v = np.take_along_axis(np.broadcast_to(null_cum, r.shape + (null_cum.shape[-1],)), r[..., None], -1)[..., 0]
            out &= v == j
        return out

    return pred


class TestThresholds:
    @pytest.mark.parametrize(
        "m,alpha,expected",
        [(2, 0.05, [0.025, 0.05]), (1, 0.05, [0.05]), (4, 0.1, [0.025, 0.05, 0.075, 0.1])],
    )
    def test_examples(self, m, alpha, expected):
        np.testing.assert_allclose(bh_thresholds(m, alpha), expected, rtol=0, atol=1e-15)

    @pytest.mark.parametrize("m,alpha", [(0, 0.05), (2, 0.0), (2, 1.0), (2.5, 0.05)])
    def test_invalid(self, m, alpha):
        with pytest.raises(ValidationError):
            bh_thresholds(m, alpha)


class TestRejectCount:
    B = [0.025, 0.05]

    @pytest.mark.parametrize("p,expected", [((0.9, 0.8), 0), ((0.2, 0.01), 1), ((0.04, 0.03), 2)])
    def test_examples(self, p, expected):
        assert bh_reject_count(p, self.B) == expected

    def test_tie_counts_as_rejection(self):
        assert bh_reject_count([0.05, 0.04], self.B) == 2
        assert bh_reject_count([0.025, 0.9], self.B) == 1

    def test_input_not_mutated(self):
        p = np.array([0.3, 0.01, 0.2])
        before = p.copy()
        bh_reject_count(p, bh_thresholds(3, 0.1))
        np.testing.assert_array_equal(p, before)

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            bh_reject_count([0.1], self.B)

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(4)
        for m in (1, 3, 6):
            b = bh_thresholds(m, 0.3)
            p = rng.random((2000, m)) ** 3
            got = bh_reject_counts(p, b)
            np.testing.assert_array_equal(got, [bh_reject_count(row, b) for row in p])


class TestJointPmf:
    @pytest.mark.parametrize("algo", [bh_joint_pmf_occupancy, bh_joint_pmf_separation])
    def test_reference_example(self, algo):
        t = algo(REF_SPEC).table
        assert t[1, 0] == pytest.approx(0.472982, abs=1e-5)
        assert t[1, 1] == pytest.approx(0.0097805, abs=1e-5)

    @pytest.mark.parametrize("algo", [bh_joint_pmf_occupancy, bh_joint_pmf_separation])
    def test_single_test(self, algo):
        t = algo(BhSpec(1, 1, 0.05, REF_ALT)).table
        assert t[1, 1] == pytest.approx(0.05, abs=1e-15)
        assert t[0, 0] == pytest.approx(0.95, abs=1e-15)

    def test_all_null_pair_against_simulation(self):
        spec = BhSpec(2, 2, 0.05)
        exact = bh_joint_pmf_occupancy(spec).table
        emp = simulate_bh(spec, SimConfig(samples=1_000_000, seed=99))
        se = np.sqrt(np.maximum(exact * (1 - exact), 1e-300) / emp.samples)
        assert np.all(np.abs(emp.table - exact) <= 4 * se + 1e-12)

    def test_all_null_pair_closed_form(self):
        # both uniform: R=2 iff max <= a; R=1 iff min <= a/2 and max > a
        a = 0.05
        t = bh_joint_pmf_occupancy(BhSpec(2, 2, a)).table
        assert t[2, 2] == pytest.approx(a * a, abs=1e-15)
        assert t[1, 1] == pytest.approx(2 * (a / 2) * (1 - a), abs=1e-15)
        assert t[0, 0] == pytest.approx(1 - a * a - a * (1 - a), abs=1e-15)

    def test_three_two_uniform(self):
        spec = BhSpec(3, 2, 0.05)
        a, b = bh_joint_pmf_occupancy(spec).table, bh_joint_pmf_separation(spec).table
        assert np.max(np.abs(a - b)) <= 1e-9

    def test_dual_algorithms_random(self):
        rng = random.Random(41)
        for _ in range(25):
            m = rng.randint(1, 5)
            spec = BhSpec(m, rng.randint(0, m), rng.uniform(0.01, 0.6), random_cdf(rng))
            a, b = bh_joint_pmf_occupancy(spec), bh_joint_pmf_separation(spec)
            a.check()
            b.check()
            assert np.max(np.abs(a.table - b.table)) <= 1e-9

    def test_engine_methods_agree_in_bh(self):
        spec = BhSpec(4, 2, 0.2, REF_ALT)
        a = bh_joint_pmf_separation(spec, method="enumerate").table
        b = bh_joint_pmf_separation(spec, method="factorized").table
        assert np.max(np.abs(a - b)) <= 1e-12

    @pytest.mark.parametrize("m,n", [(2, 1), (3, 3), (4, 1), (5, 2)])
    def test_row_sums_from_occupancy_predicate(self, m, n):
        spec = BhSpec(m, n, 0.3, REF_ALT)
        table = bh_joint_pmf_occupancy(spec).table
        thresholds = spec.thresholds.tolist()
        for k in range(m + 1):
            pr_k = occupancy_event_probability(spec.model, thresholds, bh_predicate(m, n, k))
            assert table[k].sum() == pytest.approx(pr_k, abs=1e-12)

    @pytest.mark.parametrize("m,n", [(1, 0), (2, 1), (3, 2), (4, 2)])
    def test_dp_against_brute_force_occupancy(self, m, n):
        spec = BhSpec(m, n, 0.4, REF_ALT)
        table = bh_joint_pmf_occupancy(spec).table
        thresholds = spec.thresholds.tolist()
        for k in range(m + 1):
            for j in range(n + 1):
                p = occupancy_event_probability(spec.model, thresholds, bh_predicate(m, n, k, j))
                assert table[k, j] == pytest.approx(p, abs=1e-12)

    def test_table_is_deterministic(self):
        a = bh_joint_pmf_separation(BhSpec(4, 2, 0.1, REF_ALT)).table
        b = bh_joint_pmf_separation(BhSpec(4, 2, 0.1, REF_ALT)).table
        assert a.tobytes() == b.tobytes()


class TestDecomposition:
    def test_ref_k1(self):
        events = list(bh_rejection_events(2, 0.05, 1))
        assert events == [SeparationEvent(((0.0, 0.025), (0.05, 1.0)), (1, 1))]

    def test_events_cover_everything(self):
        m = 4
        counts = [len(list(bh_rejection_events(m, 0.1, k))) for k in range(m + 1)]
        assert counts[m] == 1
        for k in range(m + 1):
            for ev in bh_rejection_events(m, 0.1, k):
                ev.validate(m)
                assert ev.intervals[0][0] == 0.0 and ev.intervals[-1][1] == 1.0

    def test_events_partition_probability(self):
        spec = BhSpec(4, 2, 0.2, REF_ALT)
        pmf = bh_joint_pmf_separation(spec)
        assert math.fsum(pmf.table.ravel()) == pytest.approx(1.0, abs=1e-12)


class TestSupportAndSerialization:
    def test_support_enforced(self):
        spec = BhSpec(2, 1, 0.05)
        table = np.zeros((3, 2))
        table[0, 1] = 1.0  # V > R
        with pytest.raises(ValidationError):
            JointPmf(table, spec).check()
        table = np.zeros((3, 2))
        table[2, 0] = 1.0  # R - V > m - n
        with pytest.raises(ValidationError):
            JointPmf(table, spec).check()
        with pytest.raises(ValidationError):
            JointPmf(np.full((3, 2), 0.1), spec).check()

    def test_json_round_trip(self):
        pmf = bh_joint_pmf_occupancy(REF_SPEC)
        assert JointPmf.from_json(pmf.to_json()) == pmf

    def test_csv_layout(self):
        lines = bh_joint_pmf_occupancy(REF_SPEC).to_csv().splitlines()
        assert lines[0] == "k,j,prob"
        assert len(lines) == 1 + 3 * 2
        assert lines[3] == "1,0,0.472982"
        assert lines[4] == "1,1,0.00978051"
        assert lines[2] == "0,1,0"


class TestSummaries:
    def test_point_mass(self):
        table = np.zeros((3, 2))
        table[0, 0] = 1.0
        assert all(v == 0.0 for v in derived_summaries(JointPmf(table, BhSpec(2, 1, 0.05))).values())

    def test_ref_fdr_contribution(self):
        pmf = bh_joint_pmf_occupancy(REF_SPEC)
        s = derived_summaries(pmf)
        t = pmf.table
        assert s["fdr"] == pytest.approx(t[1, 1] / 1 + t[2, 1] / 2, abs=1e-15)
        assert t[1, 1] / 1 == pytest.approx(0.0097805, abs=1e-5)
        assert s["fwer"] == pytest.approx(t[1, 1] + t[2, 1], abs=1e-15)
        assert s["expected_R"] == pytest.approx(t[1].sum() + 2 * t[2].sum(), abs=1e-15)

    @pytest.mark.parametrize("m", range(1, 7))
    @pytest.mark.parametrize("alpha", [0.05, 0.2, 0.5])
    def test_fdr_controlled_all_null(self, m, alpha):
        # all nulls true: FDR equals alpha exactly under independence
        s = derived_summaries(bh_joint_pmf_occupancy(BhSpec(m, m, alpha)))
        assert s["fdr"] <= alpha + 1e-9
        assert s["fdr"] == pytest.approx(alpha, abs=1e-12)
        assert s["average_power"] == 0.0


class TestGuards:
    def test_occupancy_guard(self):
        with pytest.raises(SizeGuardError, match="occupancy patterns"):
            bh_joint_pmf_occupancy(BhSpec(13, 5, 0.05))

    def test_separation_guard(self):
        with pytest.raises(SizeGuardError, match="events"):
            bh_joint_pmf_separation(BhSpec(9, 3, 0.05))

    @pytest.mark.parametrize("m,n,alpha", [(2, 3, 0.05), (2, -1, 0.05), (0, 0, 0.05), (2, 1, 1.5)])
    def test_bad_spec(self, m, n, alpha):
        with pytest.raises(ValidationError):
            BhSpec(m, n, alpha, Uniform())
