import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plhomog.ineq import (DegenerateInput, GapScan, IncrementScan, PairingScan,
                          P_SAMPLES, bregman_gap, bregman_gap_ratio,
                          feasibility_from_samples,
                          fractional_power_increment_ratio, gap_scan,
                          increment_scan, lower_bound_feasibility, make_rng,
                          midpoint_gap, monotone_pairing, pairing_scan)

finite = st.floats(-50.0, 50.0, allow_nan=False)
vec3 = st.lists(finite, min_size=1, max_size=3)
p_values = st.sampled_from(P_SAMPLES)


class TestMonotonePairing:
    @given(vec3, vec3, p_values)
    @settings(max_examples=200, deadline=None)
    def test_pairing_nonnegative(self, x, y, p):
        n = min(len(x), len(y))
        lhs, p_lower, weighted, _ = monotone_pairing(x[:n], y[:n], p)
        scale = p_lower + weighted + 1.0
        assert lhs >= -1e-10 * scale

    @given(vec3, vec3)
    @settings(max_examples=200, deadline=None)
    def test_p2_collapses_to_identity(self, x, y):
        n = min(len(x), len(y))
        lhs, p_lower, _, _ = monotone_pairing(x[:n], y[:n], 2.0)
        assert lhs == pytest.approx(p_lower, rel=1e-12, abs=1e-12)

    def test_equal_arguments_vanish(self):
        x = np.array([1.3, -0.7])
        lhs, p_lower, weighted, _ = monotone_pairing(x, x, 3.5)
        assert lhs == 0.0 and p_lower == 0.0 and weighted == 0.0

    def test_scalar_arithmetic_example(self):
        # p=3, x=2, y=1: pairing (4-1)(1)=3, |x-y|^3=1, (4+1)... weighted uses
        # |x|^{p-2}+|y|^{p-2} = 3, |x-y|^2 = 1
        lhs, p_lower, weighted, upper = monotone_pairing([2.0], [1.0], 3.0)
        assert lhs == pytest.approx(3.0)
        assert p_lower == pytest.approx(1.0)
        assert weighted == pytest.approx(3.0)
        assert upper == pytest.approx(3.0)


class TestBregmanGap:
    @given(vec3, vec3, p_values)
    @settings(max_examples=200, deadline=None)
    def test_nonnegative(self, xi, x, p):
        n = min(len(xi), len(x))
        gap = bregman_gap(xi[:n], x[:n], p)
        scale = np.linalg.norm(xi[:n]) ** p + np.linalg.norm(x[:n]) ** p + 1.0
        assert gap >= -1e-12 * scale

    def test_zero_direction_gives_plain_power(self):
        x = np.array([3.0, 4.0])
        assert bregman_gap(np.zeros(2), x, 3.0) == pytest.approx(125.0)

    def test_zero_increment(self):
        assert bregman_gap([1.0, 2.0], [0.0, 0.0], 4.0) == pytest.approx(0.0)

    @given(vec3, vec3)
    @settings(max_examples=100, deadline=None)
    def test_p2_is_square(self, xi, x):
        n = min(len(xi), len(x))
        gap = bregman_gap(xi[:n], x[:n], 2.0)
        assert gap == pytest.approx(np.linalg.norm(x[:n]) ** 2, rel=1e-9, abs=1e-9)


class TestBregmanGapRatio:
    def test_zero_direction_ratio_one(self):
        lo, hi = bregman_gap_ratio([0.0, 0.0], [0.5, -1.0], 3.5)
        assert lo == pytest.approx(1.0) and hi == pytest.approx(1.0)

    def test_p2_ratio_one(self):
        lo, _ = bregman_gap_ratio([5.0], [0.25], 2.0)
        assert lo == pytest.approx(1.0, rel=1e-10)

    def test_degenerate_input(self):
        with pytest.raises(DegenerateInput):
            bregman_gap_ratio([1.0], [0.0], 3.0)

    def test_p3_ratios_bounded(self):
        rng = make_rng(3)
        xi = rng.uniform(-10, 10, size=(20000, 1))
        x = rng.uniform(-10, 10, size=(20000, 1))
        keep = np.abs(x[:, 0]) > 1e-9
        lo, _ = bregman_gap_ratio(xi[keep], x[keep], 3.0)
        assert 0.0 < lo.min() <= 1.0 <= lo.max()


class TestMidpointGap:
    def test_equal_arguments_collapse(self):
        xi, eta = np.array([1.0, 2.0]), np.array([-0.5, 0.25])
        x = np.array([0.3, -0.4])
        assert midpoint_gap(xi, eta, x, x, 3.0) == pytest.approx(0.0, abs=1e-14)

    def test_quadratic_antisymmetric_case(self):
        xi = np.array([0.7, -0.3])
        x = np.array([1.5, 2.0])
        val = midpoint_gap(xi, xi, x, -x, 2.0)
        assert val == pytest.approx(2.0 * np.linalg.norm(x) ** 2, rel=1e-12)

    def test_scalar_arithmetic_example(self):
        # xi = eta = (1,0), X = (1,0), Y = 0, p = 3: |2|^3 + 1 - 2*1.5^3 = 2.25
        val = midpoint_gap([1.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.0, 0.0], 3.0)
        assert val == pytest.approx(2.25, rel=1e-13)

    @given(vec3, vec3, p_values)
    @settings(max_examples=100, deadline=None)
    def test_quadratic_closed_form(self, x, y, p):
        # at p = 2 the gap is exactly |X - Y|^2 / 2 for every xi, eta
        n = min(len(x), len(y))
        xi = np.linspace(0.1, 0.5, n)
        val = midpoint_gap(xi, -xi, x[:n], y[:n], 2.0)
        expected = np.linalg.norm(np.array(x[:n]) - np.array(y[:n])) ** 2 / 2
        assert val == pytest.approx(expected, rel=1e-9, abs=1e-9)


class TestIncrementBound:
    @given(st.floats(-100, 100), st.floats(-100, 100), p_values)
    @settings(max_examples=200, deadline=None)
    def test_sharp_constant(self, x, h, p):
        if abs(h) <= 1e-6:
            return
        alpha = 1.0 / (p - 1.0)
        ratio = fractional_power_increment_ratio(x, h, p)
        assert ratio <= 2.0 ** (1.0 - alpha) * (1 + 1e-9) + 1e-9

    def test_worst_case_attained(self):
        # x = -h/2 attains 2^{1-alpha}
        p = 3.0
        ratio = fractional_power_increment_ratio(-0.5, 1.0, p)
        assert ratio == pytest.approx(np.sqrt(2.0), rel=1e-12)


# frozen seeded-regression baselines (seed 7, 10^6 samples)
PAIRING_BASELINES = {
    2.0: (0.9999999999999998, 0.4999999999999999, 0.5000000000000001),
    2.5: (0.7071067811873827, 0.5000000000000341, 0.9996044275246533),
    3.0: (0.500000000001575, 0.5000000000000684, 1.0000000000017577),
    3.5: (0.3535533905953619, 0.5000000000001025, 1.2500000000119043),
    4.0: (0.25000000000236244, 0.5000000000001368, 1.4999999999919054),
    5.0: (0.12500000000236242, 0.5000000000002052, 1.999999999957057),
}
GAP_BASELINES = {
    2.0: (0.9999682328717908, 1.0000735592725352),
    3.0: (0.4438677136550451, 3.0000017272773105),
    5.0: (0.17690850860447183, 14.827335925606894),
}
INCREMENT_BASELINES = {2.0: 1.000000001056917, 3.0: 1.4142135623102257,
                       5.0: 1.6817928304513554}


class TestSeededScans:
    @pytest.mark.parametrize("p", sorted(PAIRING_BASELINES))
    def test_pairing_baselines(self, p):
        scan = pairing_scan(p, 120_000, seed=7)
        assert isinstance(scan, PairingScan)
        assert scan.violations == 0
        assert scan.lower_p > 0 and scan.lower_weighted > 0
        # the sampled minima approach the frozen full-scan values from above
        ref = PAIRING_BASELINES[p]
        assert scan.lower_p >= ref[0] - 1e-9
        assert scan.lower_weighted >= ref[1] - 1e-9
        assert scan.upper <= ref[2] + 1e-9

    def test_pairing_full_baseline_reproduced(self):
        scan = pairing_scan(3.0, 10 ** 6, seed=7)
        ref = PAIRING_BASELINES[3.0]
        assert scan.lower_p == pytest.approx(ref[0], rel=1e-9)
        assert scan.lower_weighted == pytest.approx(ref[1], rel=1e-9)
        assert scan.upper == pytest.approx(ref[2], rel=1e-9)

    @pytest.mark.parametrize("p", sorted(GAP_BASELINES))
    def test_gap_full_baselines(self, p):
        scan = gap_scan(p, 10 ** 6, seed=7)
        assert isinstance(scan, GapScan)
        assert scan.violations == 0
        lo, hi = GAP_BASELINES[p]
        assert scan.ratio_min == pytest.approx(lo, rel=1e-9)
        assert scan.ratio_max == pytest.approx(hi, rel=1e-9)
        assert 0.0 < scan.ratio_min <= 1.0 + 1e-9 <= scan.ratio_max + 2e-9

    @pytest.mark.parametrize("p", sorted(INCREMENT_BASELINES))
    def test_increment_baselines(self, p):
        scan = increment_scan(p, 10 ** 6, seed=7)
        assert isinstance(scan, IncrementScan)
        assert scan.violations == 0
        assert scan.ratio_max == pytest.approx(INCREMENT_BASELINES[p], rel=1e-9)
        assert scan.ratio_max <= scan.c_theory * (1 + 1e-8) + 1e-9


class TestLowerBoundFeasibility:
    def test_p2_half_gamma_region_nonempty(self):
        # the gap is exactly |X-Y|^2/2 at p = 2: gamma = 1/2 needs no correction
        rng = make_rng(11)
        x = rng.uniform(-10, 10, size=(5000, 2))
        y = rng.uniform(-10, 10, size=(5000, 2))
        xi = rng.uniform(-10, 10, size=(5000, 2))
        eta = rng.uniform(-10, 10, size=(5000, 2))
        gap = midpoint_gap(xi, eta, x, y, 2.0)
        dist = np.linalg.norm(x - y, axis=-1) ** 2
        assert np.all(gap - 0.5 * dist >= -1e-10 * (dist + 1.0))

    def test_equal_endpoints_feasible_for_every_gamma(self):
        n = 100
        gap = np.zeros(n)
        dist_p = np.zeros(n)
        corr = np.zeros(n)
        scale = np.ones(n)
        rep = feasibility_from_samples(gap, dist_p, corr, scale, 3.0, 0.5, 0, n)
        assert rep.feasible and rep.gamma == 1.0 and rep.c == 0.0

    def test_p35_seeded_pass(self):
        rep = lower_bound_feasibility(3.5, 0.5, 100_000, seed=42)
        assert rep.feasible
        assert rep.branch == "global"
        assert rep.min_margin >= -1e-9

    def test_restricted_branch_needs_delta(self):
        with pytest.raises(ValueError):
            lower_bound_feasibility(2.5, 0.0, 100, seed=0)

    def test_restricted_branch_runs(self):
        rep = lower_bound_feasibility(2.5, 0.5, 50_000, seed=1)
        assert rep.feasible and rep.branch == "restricted"

    def test_report_dict_round_trip(self):
        rep = lower_bound_feasibility(3.0, 0.5, 10_000, seed=5)
        payload = rep.as_dict()
        assert payload["feasible"] is True
        assert set(payload) == {"p", "delta", "n_samples", "seed", "feasible",
                                "gamma", "c", "min_margin", "branch"}


class TestDeterminism:
    def test_same_seed_same_scan(self):
        a = pairing_scan(3.0, 50_000, seed=123)
        b = pairing_scan(3.0, 50_000, seed=123)
        assert a == b

    def test_different_seed_differs(self):
        a = pairing_scan(3.0, 50_000, seed=123)
        b = pairing_scan(3.0, 50_000, seed=124)
        assert a.lower_p != b.lower_p
