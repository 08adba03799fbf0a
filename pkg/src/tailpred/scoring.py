"""Verification of predictive distributions with proper scoring rules.

Per-observation tools: the probability integral transform, the logarithmic
score, the continuous ranked probability score in both its threshold form

    crps = integral (G(s) - 1{s >= y})^2 ds

and its quantile decomposition

    crps = integral_0^1 2 (1{y <= q_p} - p) (q_p - y) dp,

the check-loss quantile verification score, and empirical coverage.
Aggregation produces a ScoreReport comparable across prediction methods;
an infinite mean log score is a legitimate reported value (it happens
whenever one realized value falls outside a method's support), not an
error.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import binom

DEFAULT_TAUS = (0.99, 0.95, 0.90, 0.75, 0.50)
DEFAULT_WEIGHT_THRESHOLD = 0.85
# tails of the predictive grid are extended by this fraction of its range
# before CRPS integration
EXTEND_FRACTION = 0.5
TAIL_TOL = 1e-10


def quantile_loss(u, tau):
    """Check loss rho_tau(u) = tau u 1{u >= 0} + (tau - 1) u 1{u < 0}."""
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    u = np.asarray(u, dtype=float)
    return np.where(u >= 0, tau * u, (tau - 1.0) * u)


def qvs(realized, quantile_preds, tau):
    """Quantile verification score: summed check loss, lower is better."""
    realized = np.asarray(realized, dtype=float)
    preds = np.asarray(quantile_preds, dtype=float)
    if realized.shape != preds.shape:
        raise ValueError("realized and predicted quantiles must align")
    return float(quantile_loss(realized - preds, tau).sum())


def coverage(realized, quantile_preds):
    """Fraction of realized values at or below their predicted quantile."""
    realized = np.asarray(realized, dtype=float)
    preds = np.asarray(quantile_preds, dtype=float)
    if realized.shape != preds.shape:
        raise ValueError("realized and predicted quantiles must align")
    return float((realized <= preds).mean())


def log_score(density_at_realized):
    """-log of the predictive density at the realized value; +inf at zero."""
    d = float(density_at_realized)
    if d < 0:
        raise ValueError("density value must be nonnegative")
    if d == 0.0:
        return math.inf
    return -math.log(d)


def _extended_cdf(grid, cdf_values, y):
    """Knots of the predictive CDF tapered to 0 and 1 beyond its grid."""
    grid = np.asarray(grid, dtype=float)
    g = np.asarray(cdf_values, dtype=float)
    if np.any(np.diff(g) < -1e-12):
        raise ValueError("predictive CDF must be nondecreasing on its grid")
    span = grid[-1] - grid[0]
    lo = min(grid[0] - EXTEND_FRACTION * span, y - 0.01 * span)
    hi = max(grid[-1] + EXTEND_FRACTION * span, y + 0.01 * span)
    return (
        np.concatenate([[lo], grid, [hi]]),
        np.concatenate([[0.0], np.clip(g, 0.0, 1.0), [1.0]]),
    )


def crps(grid, cdf_values, y):
    """Threshold-form CRPS of a grid-based predictive CDF at realized y.

    The integral splits at y so the jump of the indicator lands on a node;
    the grid is extended by half its range on each side (and past y when y
    lies outside), where the integrand is already below 1e-10.
    """
    knots, g = _extended_cdf(grid, cdf_values, y)
    y = float(y)

    def seg_integral(a, b, left_of_y):
        pts = np.unique(np.clip(np.concatenate([knots, [a, b]]), a, b))
        vals = np.interp(pts, knots, g)
        integrand = vals**2 if left_of_y else (1.0 - vals) ** 2
        return np.trapezoid(integrand, pts)

    lo, hi = knots[0], knots[-1]
    return float(seg_integral(lo, y, True) + seg_integral(y, hi, False))


def crps_quantile_decomposition(grid, cdf_values, y, p_grid=None):
    """Per-quantile CRPS curve QS_p = 2 (1{y <= q_p} - p)(q_p - y).

    Returns (p_grid, curve); the trapezoid integral of the curve over p
    recovers the threshold-form CRPS.
    """
    if p_grid is None:
        p_grid = np.linspace(1e-4, 1.0 - 1e-4, 4001)
    p_grid = np.asarray(p_grid, dtype=float)
    if np.any((p_grid <= 0) | (p_grid >= 1)):
        raise ValueError("p grid must lie inside (0, 1)")
    g = np.asarray(cdf_values, dtype=float)
    q = np.interp(p_grid, g, np.asarray(grid, dtype=float))
    curve = 2.0 * ((y <= q).astype(float) - p_grid) * (q - y)
    return p_grid, curve


def integrate_quantile_curve(p_grid, curve, weight=None):
    """Integrate a quantile-score curve over p, optionally weighted.

    weight may be None (unit weight), a callable v(p), or a threshold float
    c meaning the indicator v(p) = 1{p > c}.
    """
    p_grid = np.asarray(p_grid, dtype=float)
    curve = np.asarray(curve, dtype=float)
    if weight is None:
        return float(np.trapezoid(curve, p_grid))
    if callable(weight):
        return float(np.trapezoid(curve * weight(p_grid), p_grid))
    c = float(weight)
    # indicator weight: integrate only above c, with the cut point inserted
    mask = p_grid > c
    if not mask.any():
        return 0.0
    p_cut = np.concatenate([[c], p_grid[mask]])
    cv = np.concatenate([[np.interp(c, p_grid, curve)], curve[mask]])
    return float(np.trapezoid(cv, p_cut))


@dataclass(frozen=True)
class PitHistogram:
    """Decile counts of PIT values with binomial sampling bands."""

    bin_counts: np.ndarray
    n: int
    lower_band: float
    upper_band: float
    bins: int = 10

    def to_dict(self):
        return {
            "bin_counts": [int(c) for c in self.bin_counts],
            "n": self.n,
            "lower_band": self.lower_band,
            "upper_band": self.upper_band,
            "bins": self.bins,
        }


def pit_histogram(pits, bins=10):
    """Histogram of PIT values with Binomial(n, 1/bins) 0.05/0.95 bands."""
    pits = np.asarray(pits, dtype=float)
    if np.any((pits < 0) | (pits > 1)):
        raise ValueError("PIT values must lie in [0, 1]")
    counts, _ = np.histogram(pits, bins=np.linspace(0.0, 1.0, bins + 1))
    n = pits.size
    return PitHistogram(
        bin_counts=counts,
        n=n,
        lower_band=float(binom.ppf(0.05, n, 1.0 / bins)),
        upper_band=float(binom.ppf(0.95, n, 1.0 / bins)),
        bins=bins,
    )


@dataclass(frozen=True)
class ScoreReport:
    """Per-observation and aggregate verification metrics for one method."""

    method: str
    pit: np.ndarray
    log_scores: np.ndarray
    crps_values: np.ndarray
    quantiles: dict  # tau -> predicted quantiles
    realized: np.ndarray
    taus: tuple
    weight_threshold: float
    p_grid: np.ndarray
    mean_quantile_curve: np.ndarray

    @property
    def n(self):
        return self.realized.size

    @property
    def mean_log_score(self):
        return float(np.mean(self.log_scores))

    @property
    def mean_crps(self):
        return float(np.mean(self.crps_values))

    @property
    def mean_weighted_crps(self):
        return integrate_quantile_curve(
            self.p_grid, self.mean_quantile_curve, weight=self.weight_threshold
        )

    def qvs_table(self):
        return {tau: qvs(self.realized, self.quantiles[tau], tau) for tau in self.taus}

    def coverage_table(self):
        return {tau: coverage(self.realized, self.quantiles[tau]) for tau in self.taus}

    def sampling_error_table(self):
        """Bernoulli standard error of the coverage estimate per tau."""
        return {
            tau: math.sqrt(tau * (1.0 - tau) / self.n) for tau in self.taus
        }

    def pit_hist(self, bins=10):
        return pit_histogram(self.pit, bins=bins)

    def to_dict(self):
        return {
            "method": self.method,
            "n": self.n,
            "mean_log_score": self.mean_log_score,
            "mean_crps": self.mean_crps,
            "mean_weighted_crps": self.mean_weighted_crps,
            "weight_threshold": self.weight_threshold,
            "qvs": {str(t): v for t, v in self.qvs_table().items()},
            "coverage": {str(t): v for t, v in self.coverage_table().items()},
            "sampling_error": {str(t): v for t, v in self.sampling_error_table().items()},
            "pit_histogram": self.pit_hist().to_dict(),
            "crps_decomposition": {
                "p": self.p_grid.tolist(),
                "mean_curve": self.mean_quantile_curve.tolist(),
            },
        }

    def save_json(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)


def score_method(
    realized,
    predictions,
    method="",
    taus=DEFAULT_TAUS,
    weight_threshold=DEFAULT_WEIGHT_THRESHOLD,
    p_grid=None,
):
    """Score one method's grid-density predictions against realized values.

    predictions is a sequence of objects exposing grid / cdf_grid /
    density_at / quantile / pit (GridDensity and the baseline adapters).
    """
    realized = np.asarray(realized, dtype=float)
    if len(predictions) != realized.size:
        raise ValueError("one prediction per realized value required")
    if p_grid is None:
        p_grid = np.linspace(1e-4, 1.0 - 1e-4, 4001)
    pit = np.array([pred.pit(y) for pred, y in zip(predictions, realized)])
    logs = np.array(
        [log_score(pred.density_at(y)) for pred, y in zip(predictions, realized)]
    )
    crps_vals = np.empty(realized.size)
    curves = np.zeros((realized.size, p_grid.size))
    for i, (pred, y) in enumerate(zip(predictions, realized)):
        crps_vals[i] = crps(pred.grid, pred.cdf_grid, y)
        _, curves[i] = crps_quantile_decomposition(pred.grid, pred.cdf_grid, y, p_grid)
    quantiles = {
        tau: np.array([pred.quantile(tau) for pred in predictions]) for tau in taus
    }
    return ScoreReport(
        method=method,
        pit=pit,
        log_scores=logs,
        crps_values=crps_vals,
        quantiles=quantiles,
        realized=realized,
        taus=tuple(taus),
        weight_threshold=weight_threshold,
        p_grid=p_grid,
        mean_quantile_curve=curves.mean(axis=0),
    )


def write_flat_csv(reports, path):
    """One row per observation per method, for external plotting."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        header = ["method", "index", "realized", "pit", "log_score", "crps"]
        taus = reports[0].taus if reports else DEFAULT_TAUS
        header += [f"q{int(round(t * 100)):02d}" for t in taus]
        writer.writerow(header)
        for rep in reports:
            for i in range(rep.n):
                row = [
                    rep.method,
                    i,
                    rep.realized[i],
                    rep.pit[i],
                    rep.log_scores[i],
                    rep.crps_values[i],
                ]
                row += [rep.quantiles[t][i] for t in rep.taus]
                writer.writerow(row)
