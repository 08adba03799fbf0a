"""Tests for the proper scoring rules and verification report."""

import math

import numpy as np
import pytest
from scipy import stats

from tailpred.predict import GridDensity
from tailpred.scoring import (
    coverage,
    crps,
    crps_quantile_decomposition,
    integrate_quantile_curve,
    log_score,
    pit_histogram,
    quantile_loss,
    qvs,
    score_method,
    write_flat_csv,
)


class TestQuantileLoss:
    def test_positive_branch(self):
        assert quantile_loss(2.0, 0.95) == pytest.approx(1.9)

    def test_negative_branch(self):
        assert quantile_loss(-2.0, 0.95) == pytest.approx(0.1)

    def test_zero(self):
        for tau in (0.1, 0.5, 0.9):
            assert quantile_loss(0.0, tau) == 0.0

    def test_tau_domain(self):
        with pytest.raises(ValueError):
            quantile_loss(1.0, 0.0)


class TestQvs:
    def test_perfect_predictions(self):
        y = np.array([1.0, 2.0, 3.0])
        assert qvs(y, y, 0.9) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            qvs([1.0, 2.0], [1.0], 0.9)

    def test_propriety_monte_carlo(self):
        # the true tau-quantile minimizes the expected check loss
        rng = np.random.default_rng(3)
        x = rng.normal(size=10**5)
        for tau in (0.5, 0.9, 0.99):
            q_true = stats.norm.ppf(tau)
            base = quantile_loss(x - q_true, tau)
            for delta in (-0.3, 0.3):
                pert = quantile_loss(x - (q_true + delta), tau)
                diff = pert - base
                se = diff.std(ddof=1) / math.sqrt(x.size)
                assert diff.mean() > -3 * se


class TestLogScore:
    def test_unit_density(self):
        assert log_score(1.0) == 0.0

    def test_zero_density_infinite(self):
        assert log_score(0.0) == math.inf
        scores = [log_score(0.5), log_score(0.0)]
        assert np.mean(scores) == math.inf

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            log_score(-0.1)

    def test_propriety_monte_carlo(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=10**5)
        truth = -stats.norm.logpdf(x)
        alt = -stats.norm.logpdf(x, loc=0.5)
        diff = alt - truth
        se = diff.std(ddof=1) / math.sqrt(x.size)
        # expected gap is the KL divergence 0.125
        assert diff.mean() > 3 * se


class TestCrps:
    def test_point_mass_scores_zero(self):
        grid = np.array([0.999999, 1.000001])
        assert crps(grid, np.array([0.0, 1.0]), 1.0) < 1e-5

    def test_uniform_forecast_analytic(self):
        # integral of s^2 on (0, 1/2) plus (s-1)^2 on (1/2, 1) = 1/24 + 1/24
        grid = np.linspace(0.0, 1.0, 4001)
        val = crps(grid, grid, 0.5)
        assert abs(val - 1.0 / 12.0) < 1e-4

    def test_observation_outside_support(self):
        grid = np.linspace(0.0, 1.0, 1001)
        near = crps(grid, grid, 1.5)
        far = crps(grid, grid, 2.5)
        # each unit of distance outside the support adds one unit of area
        assert far - near == pytest.approx(1.0, abs=1e-3)

    def test_non_monotone_cdf_rejected(self):
        grid = np.linspace(0.0, 1.0, 11)
        bad = np.linspace(0.0, 1.0, 11)
        bad[5] = 0.9
        with pytest.raises(ValueError):
            crps(grid, bad, 0.5)

    def test_gaussian_closed_form(self):
        # Gneiting-Raftery closed form for a normal predictive
        mu, sd = 1.0, 2.0
        grid = np.linspace(mu - 10 * sd, mu + 10 * sd, 20001)
        cdf = stats.norm.cdf(grid, mu, sd)
        for y in (-1.0, 1.0, 4.0):
            z = (y - mu) / sd
            closed = sd * (
                z * (2 * stats.norm.cdf(z) - 1)
                + 2 * stats.norm.pdf(z)
                - 1.0 / math.sqrt(math.pi)
            )
            assert abs(crps(grid, cdf, y) - closed) < 1e-4


class TestQuantileDecomposition:
    def _random_forecast(self, rng):
        mu = rng.uniform(-2, 2)
        sd = rng.uniform(0.5, 3.0)
        grid = np.linspace(mu - 8 * sd, mu + 8 * sd, 3001)
        return grid, stats.norm.cdf(grid, mu, sd), mu, sd

    def test_identity_with_threshold_form(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            grid, cdf, mu, sd = self._random_forecast(rng)
            y = rng.uniform(mu - 3 * sd, mu + 3 * sd)
            p, curve = crps_quantile_decomposition(grid, cdf, y)
            via_quantiles = integrate_quantile_curve(p, curve)
            direct = crps(grid, cdf, y)
            assert abs(via_quantiles - direct) < 1e-3 * max(direct, 1e-6)

    def test_unit_weight_matches_unweighted(self):
        rng = np.random.default_rng(9)
        grid, cdf, mu, sd = self._random_forecast(rng)
        p, curve = crps_quantile_decomposition(grid, cdf, mu + sd)
        unweighted = integrate_quantile_curve(p, curve)
        weighted = integrate_quantile_curve(p, curve, weight=lambda q: np.ones_like(q))
        assert weighted == pytest.approx(unweighted, rel=1e-12)

    def test_indicator_weight_integrates_upper_tail(self):
        p = np.linspace(0.001, 0.999, 999)
        curve = np.ones_like(p)
        val = integrate_quantile_curve(p, curve, weight=0.85)
        assert val == pytest.approx(0.149, abs=1e-3)

    def test_curve_nonnegative(self):
        rng = np.random.default_rng(11)
        grid, cdf, mu, sd = self._random_forecast(rng)
        p, curve = crps_quantile_decomposition(grid, cdf, mu)
        assert np.all(curve >= -1e-12)


class TestPitHistogram:
    def test_uniform_grid_exact_counts(self):
        n = 1000
        pits = (np.arange(n) + 0.5) / n
        hist = pit_histogram(pits)
        np.testing.assert_array_equal(hist.bin_counts, np.full(10, 100))

    def test_binomial_bands_n1000(self):
        hist = pit_histogram(np.linspace(0.01, 0.99, 1000))
        assert hist.lower_band == 85.0
        assert hist.upper_band == 116.0

    def test_degenerate_single_bin(self):
        hist = pit_histogram(np.full(100, 0.05))
        assert hist.bin_counts[0] == 100
        assert (hist.bin_counts[1:] == 0).all()

    def test_domain(self):
        with pytest.raises(ValueError):
            pit_histogram([0.5, 1.5])


class TestCoverage:
    def test_all_below(self):
        assert coverage([1.0, 2.0], [5.0, 5.0]) == 1.0

    def test_calibrated_forecaster(self):
        rng = np.random.default_rng(13)
        n = 10**5
        mu = rng.uniform(-5, 5, size=n)
        y = rng.normal(loc=mu)
        for tau in (0.5, 0.9, 0.95):
            q = mu + stats.norm.ppf(tau)
            se = math.sqrt(tau * (1 - tau) / n)
            assert abs(coverage(y, q) - tau) < 3 * se


@pytest.fixture(scope="module")
def report():
    rng = np.random.default_rng(17)
    n = 40
    mus = rng.uniform(0, 4, size=n)
    realized = rng.normal(loc=mus)
    preds = []
    for m in mus:
        grid = np.linspace(m - 8, m + 8, 2001)
        preds.append(
            GridDensity(
                grid=grid,
                density=stats.norm.pdf(grid, m),
                cdf_grid=stats.norm.cdf(grid, m),
            )
        )
    return score_method(realized, preds, method="normal")


class TestScoreReport:
    def test_aggregate_consistency(self, report):
        # mean CRPS equals the integrated mean quantile curve
        via_curve = integrate_quantile_curve(report.p_grid, report.mean_quantile_curve)
        assert abs(via_curve - report.mean_crps) < 1e-3 * report.mean_crps

    def test_tables_complete(self, report):
        assert set(report.qvs_table()) == set(report.taus)
        cov = report.coverage_table()
        assert all(0.0 <= v <= 1.0 for v in cov.values())
        se = report.sampling_error_table()
        assert se[0.5] == pytest.approx(math.sqrt(0.25 / report.n))

    def test_json_round_trip(self, report, tmp_path):
        import json

        path = tmp_path / "report.json"
        report.save_json(path)
        doc = json.loads(path.read_text())
        assert doc["method"] == "normal"
        assert doc["n"] == report.n
        assert "0.95" in doc["coverage"]

    def test_flat_csv(self, report, tmp_path):
        path = tmp_path / "scores.csv"
        write_flat_csv([report], path)
        lines = path.read_text().strip().splitlines()
        assert len(lines) == 1 + report.n
        assert lines[0].startswith("method,index,realized,pit,log_score,crps,q99")
