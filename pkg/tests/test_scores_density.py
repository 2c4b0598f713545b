import itertools
import math
from datetime import date

import numpy as np
import pytest

from wiscore.distributions import DiscreteDistribution, NegBinParams, point_mass, tabulate
from wiscore.forecast_data import BinnedForecast, ForecastUnitKey
from wiscore.scores_density import (
    LogScoreConfig,
    binned_crps_via_point_mass,
    crps_discrete,
    log_score,
    multibin_log_score,
)
from wiscore.scores_quantile import quantile_score

from conftest import F, G, brute_pmf

KEY = ForecastUnitKey("m", "US", "1 wk ahead", date(2017, 1, 7), date(2017, 1, 1))

# brute-force sum over x = 0..5000 of (cumulative brute pmf - step)^2
CRPS_F = {
    0: 43.05695879427072,
    30: 15.673714092992013,
    60: 7.267734573548705,
    90: 20.57941596481148,
    120: 45.0745937861587,
    190: 113.12287950137599,
}


def brute_crps(mu, psi, y, n=5000):
    c = total = 0.0
    for x in range(n + 1):
        c += brute_pmf(mu, psi, x)
        total += (c - (x >= y)) ** 2
    return total


def five_point_grid(step):
    """All probability vectors on 5 points with components in multiples of step."""
    n = round(1 / step)
    for parts in itertools.product(range(n + 1), repeat=4):
        rest = n - sum(parts)
        if rest >= 0:
            yield np.array(parts + (rest,)) / n


class TestLogScore:
    def test_reference_values(self):
        assert log_score(tabulate(F), 190) == pytest.approx(-9.37, abs=0.01)
        assert log_score(tabulate(G), 190) == pytest.approx(-9.69, abs=0.01)

    def test_floor_on_zero_probability(self):
        assert log_score(point_mass(7), 3) == -10.0
        assert log_score(point_mass(7), 3, LogScoreConfig(-5.0)) == -5.0

    def test_floor_applies_to_tiny_mass(self):
        assert log_score(tabulate(F), 600) == -10.0

    def test_invariant_to_tabulation_range(self):
        a = tabulate(F, 1e-6)
        b = tabulate(F, 1e-12)
        for y in (0, 55, 120):
            assert log_score(a, y) == log_score(b, y)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            LogScoreConfig(truncation_floor=0.0)
        with pytest.raises(ValueError):
            LogScoreConfig(tolerance_radius_d=-1)

    def test_propriety_by_brute_force(self):
        p = np.array([0.1, 0.2, 0.4, 0.2, 0.1])
        cfg = LogScoreConfig()

        def expected(q):
            dist = DiscreteDistribution.truncated(0, q)
            return sum(p[y] * log_score(dist, y, cfg) for y in range(5))

        best = max(five_point_grid(0.05), key=expected)
        np.testing.assert_allclose(best, p, atol=1e-12)


class TestMultibinLogScore:
    def test_zero_radius_equals_log_score(self):
        t = tabulate(F)
        for y in (0, 10, 60, 190, 700):
            assert multibin_log_score(t, y, LogScoreConfig(tolerance_radius_d=0)) == log_score(t, y)

    def test_uniform(self):
        d = DiscreteDistribution(0, np.full(10, 0.1))
        assert multibin_log_score(d, 4, LogScoreConfig(tolerance_radius_d=2)) == pytest.approx(math.log(0.5))

    def test_window_sum_oracle(self):
        t = tabulate(F)
        expected = math.log(math.fsum(brute_pmf(60, 4, k) for k in range(55, 66)))
        assert expected == pytest.approx(-1.9780080495015886, abs=1e-12)
        assert multibin_log_score(t, 60, LogScoreConfig(tolerance_radius_d=5)) == pytest.approx(expected, abs=1e-10)

    def test_window_clipped_at_support_edges(self):
        d = DiscreteDistribution(2, [0.5, 0.5])
        assert multibin_log_score(d, 0, LogScoreConfig(tolerance_radius_d=2)) == pytest.approx(math.log(0.5))
        assert multibin_log_score(d, -5, LogScoreConfig(tolerance_radius_d=2)) == -10.0

    @pytest.mark.parametrize("d", [0, 1, 3, 10])
    def test_never_below_log_score(self, d):
        t = tabulate(G)
        cfg = LogScoreConfig(tolerance_radius_d=d)
        for y in range(0, 400, 7):
            assert multibin_log_score(t, y, cfg) >= log_score(t, y, cfg)

    def test_improper_dishonest_report_pays(self):
        p = np.array([0.3, 0.05, 0.3, 0.05, 0.3])
        cfg = LogScoreConfig(tolerance_radius_d=1)

        def expected(q):
            dist = DiscreteDistribution.truncated(0, q)
            return sum(p[y] * multibin_log_score(dist, y, cfg) for y in range(5))

        honest = expected(p)
        best = max(five_point_grid(0.05), key=expected)
        assert expected(best) > honest + 1e-6
        assert not np.allclose(best, p)


class TestCrpsDiscrete:
    def test_point_mass(self):
        assert crps_discrete(point_mass(7), 7) == 0.0
        assert crps_discrete(point_mass(7), 3) == 4.0
        assert crps_discrete(point_mass(7), 12) == 5.0

    @pytest.mark.parametrize("y", sorted(CRPS_F))
    def test_negbin_against_frozen_oracle(self, y):
        assert crps_discrete(tabulate(F, 1e-12), y) == pytest.approx(CRPS_F[y], rel=1e-9)

    def test_oracle_reproduces_frozen_value(self):
        assert brute_crps(60, 4, 60) == pytest.approx(CRPS_F[60], rel=1e-12)

    def test_extends_beyond_support(self):
        d = DiscreteDistribution(0, [0.5, 0.5])
        # x=0: (0.5)^2, x=1..9: 1, y=10 onward: 0
        assert crps_discrete(d, 10) == pytest.approx(0.25 + 9.0)
        # x=-3..-1: 1, x=0: (0.5-1)^2, x=1: 0
        assert crps_discrete(d, -3) == pytest.approx(3.25)

    def test_zero_only_for_matching_point_mass(self):
        d = DiscreteDistribution(0, [0.01, 0.99])
        assert crps_discrete(d, 1) > 0

    def test_matches_quantile_score_integral(self):
        t = tabulate(F, 1e-12)
        taus = np.arange(0.005, 1.0, 0.01)
        qs_levels = [t.quantile(tau) for tau in taus]
        for y in (0, 30, 60, 120, 190):
            qs = np.mean([quantile_score(tau, q, y) for tau, q in zip(taus, qs_levels)])
            assert qs == pytest.approx(crps_discrete(t, y), rel=0.01)

    def test_rejects_fractional_outcome(self):
        with pytest.raises(ValueError):
            crps_discrete(point_mass(1), 1.5)


def make_bins(start, width, probs):
    return BinnedForecast(KEY, tuple((start + i * width, start + (i + 1) * width, p) for i, p in enumerate(probs)))


class TestBinnedCrps:
    def test_single_bin(self):
        assert binned_crps_via_point_mass(make_bins(0.0, 0.1, [1.0]), 0.05) == 0.0

    def test_two_bins_unit_gap(self):
        bins = make_bins(0.0, 0.5, [1.0, 0.0])
        assert binned_crps_via_point_mass(bins, 0.7) == pytest.approx(0.5)

    def test_scale_equivariance(self):
        rng = np.random.default_rng(11)
        probs = rng.dirichlet(np.ones(131))
        wide = make_bins(0.0, 0.1, probs)
        unit = DiscreteDistribution(0, probs)
        for y_idx in (0, 13, 64, 130, 150):
            y = 0.1 * y_idx + 0.05
            assert binned_crps_via_point_mass(wide, y) == pytest.approx(0.1 * crps_discrete(unit, y_idx), rel=1e-12)

    def test_outcome_snapped_to_its_bin(self):
        bins = make_bins(0.0, 0.1, [0.2, 0.3, 0.5])
        assert binned_crps_via_point_mass(bins, 0.11) == binned_crps_via_point_mass(bins, 0.19)
