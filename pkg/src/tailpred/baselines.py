"""Kriging baselines: Gaussian conditionals and indicator-kriged CDFs.

Simple kriging with the training mean and covariance treated as known
gives, under a Gaussian assumption, the exact conditional law of the
hidden component: a normal with the kriging predictor as mean and the
mean-squared prediction error as variance.

Indicator kriging estimates P(Y_d > u | indicators of the observed
components) by ordinary kriging of the exceedance indicators at each
threshold u of a grid, then makes the raw curve a valid survival function
by an antitonic (pool-adjacent-violators) projection followed by a
monotonicity-preserving piecewise-cubic interpolant, whose negated
derivative is the predictive density.

No spatial covariance function is fit anywhere; the empirical covariance
matrix of the training data (or of its indicators) is used directly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.stats import norm


@dataclass(frozen=True)
class GaussianConditional:
    """Conditional normal law from simple kriging."""

    mean: float
    variance: float

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError("variance must be nonnegative")

    @property
    def sd(self):
        return np.sqrt(self.variance)

    def density(self, y):
        return norm.pdf(y, loc=self.mean, scale=self.sd)

    def cdf(self, y):
        return norm.cdf(y, loc=self.mean, scale=self.sd)

    def quantile(self, p):
        return norm.ppf(p, loc=self.mean, scale=self.sd)

    def to_grid(self, n=1025, span=8.0):
        """Evaluate on a +-span sd grid, for the uniform scoring pass."""
        grid = np.linspace(self.mean - span * self.sd, self.mean + span * self.sd, n)
        from .predict import GridDensity

        return GridDensity(grid=grid, density=self.density(grid), cdf_grid=self.cdf(grid))


def _values(train):
    return train.values if hasattr(train, "values") else np.asarray(train, dtype=float)


def estimate_moments(train):
    """Sample mean and covariance (denominator n - 1) of the training rows.

    Warns when the covariance is numerically rank deficient.
    """
    x = _values(train)
    n, d = x.shape
    if n <= d:
        raise ValueError("need more rows than columns to estimate the covariance")
    mean = x.mean(axis=0)
    cov = np.cov(x, rowvar=False, ddof=1)
    eig = np.linalg.eigvalsh(cov)
    if eig[0] <= 1e-12 * max(eig[-1], 1.0):
        warnings.warn("covariance matrix is singular or nearly so", UserWarning)
    return mean, cov


def simple_krige(obs, mean, cov, hidden=-1):
    """Gaussian conditional of the hidden component given the others.

    mean and cov are the full d-dimensional moments; obs holds the d-1
    observed values in column order with the hidden column removed.
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    obs = np.asarray(obs, dtype=float)
    d = mean.size
    hidden = hidden % d
    rest = [j for j in range(d) if j != hidden]
    if obs.size != d - 1:
        raise ValueError(f"expected {d - 1} observed values")
    c_oo = cov[np.ix_(rest, rest)]
    c_ho = cov[hidden, rest]
    try:
        w = np.linalg.solve(c_oo, c_ho)
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError("observed-block covariance is singular") from None
    m = mean[hidden] + w @ (obs - mean[rest])
    v = cov[hidden, hidden] - w @ c_ho
    return GaussianConditional(mean=float(m), variance=float(max(v, 0.0)))


def pava_nonincreasing(y, weights=None):
    """Weighted least squares projection onto nonincreasing sequences.

    Pool-adjacent-violators: adjacent increasing pairs are merged into
    their weighted mean until the sequence is nonincreasing.  Monotone
    input comes back unchanged.
    """
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)
    # blocks of (weighted sum, weight, count)
    vals, wts, cnt = [], [], []
    for yi, wi in zip(y, w):
        vals.append(yi * wi)
        wts.append(wi)
        cnt.append(1)
        # merge while the previous block mean is below the new one
        while len(vals) > 1 and vals[-2] / wts[-2] < vals[-1] / wts[-1]:
            vals[-2] += vals[-1]
            wts[-2] += wts[-1]
            cnt[-2] += cnt[-1]
            vals.pop()
            wts.pop()
            cnt.pop()
    out = np.empty_like(y)
    pos = 0
    for v, wt, c in zip(vals, wts, cnt):
        out[pos : pos + c] = v / wt
        pos += c
    return out


@dataclass(frozen=True)
class IndicatorCurve:
    """Exceedance-probability curve over a threshold grid.

    raw holds the per-threshold kriged probabilities (clipped to [0, 1]);
    smoothed is their antitonic projection, interpolated by a shape
    preserving cubic so the implied density -dS/du exists and is
    nonnegative.
    """

    thresholds: np.ndarray
    raw: np.ndarray
    smoothed: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.thresholds, dtype=float)
        if u.size < 4:
            raise ValueError("need at least 4 thresholds")
        if np.any(np.diff(u) <= 0):
            raise ValueError("thresholds must be increasing")
        s = np.asarray(self.smoothed, dtype=float)
        if np.any(np.diff(s) > 1e-12) or s.min() < -1e-12 or s.max() > 1 + 1e-12:
            raise ValueError("smoothed curve must be nonincreasing within [0, 1]")
        object.__setattr__(self, "thresholds", u)
        object.__setattr__(self, "raw", np.asarray(self.raw, dtype=float))
        object.__setattr__(self, "smoothed", np.clip(s, 0.0, 1.0))
        object.__setattr__(self, "_interp", PchipInterpolator(u, self.smoothed))
        object.__setattr__(self, "_deriv", self._interp.derivative())

    def survival(self, u):
        u = np.asarray(u, dtype=float)
        lo, hi = self.thresholds[0], self.thresholds[-1]
        out = self._interp(np.clip(u, lo, hi))
        out = np.where(u < lo, self.smoothed[0], out)
        out = np.where(u > hi, self.smoothed[-1], out)
        return out

    def cdf(self, u):
        return 1.0 - self.survival(u)

    def density(self, u):
        u = np.asarray(u, dtype=float)
        inside = (u >= self.thresholds[0]) & (u <= self.thresholds[-1])
        out = np.where(inside, -self._deriv(u), 0.0)
        return np.maximum(out, 0.0)

    def quantile(self, p):
        p = np.asarray(p, dtype=float)
        if np.any((p <= 0) | (p >= 1)):
            raise ValueError("probabilities must lie in (0, 1)")
        cdf_vals = self.cdf(self.thresholds)
        return np.interp(p, cdf_vals, self.thresholds)

    def to_grid(self):
        from .predict import GridDensity

        dens = self.density(self.thresholds)
        return GridDensity(
            grid=self.thresholds, density=dens, cdf_grid=self.cdf(self.thresholds)
        )


def monotone_smooth(thresholds, raw):
    """Build a valid survival curve with density from raw (u, p) pairs."""
    u = np.asarray(thresholds, dtype=float)
    p = np.asarray(raw, dtype=float)
    if u.size < 4:
        raise ValueError("need at least 4 points to smooth")
    pooled = np.clip(pava_nonincreasing(p), 0.0, 1.0)
    return IndicatorCurve(thresholds=u, raw=p, smoothed=pooled)


def _ordinary_krige_weights(c_oo, c_ho):
    """Ordinary kriging weights (sum to one via a Lagrange multiplier)."""
    k = c_oo.shape[0]
    a = np.empty((k + 1, k + 1))
    a[:k, :k] = c_oo
    a[:k, k] = 1.0
    a[k, :k] = 1.0
    a[k, k] = 0.0
    b = np.concatenate([c_ho, [1.0]])
    sol = np.linalg.solve(a, b)
    return sol[:k]


def indicator_krige(obs, train, u_grid, hidden=-1):
    """Indicator-kriged conditional exceedance curve for the hidden column.

    For each threshold u the training indicators I(Y_j > u) provide the
    covariance; ordinary kriging of the observed indicators estimates
    P(Y_hidden > u | indicators), clipped to [0, 1].  Thresholds where the
    kriging system is singular (constant indicators) are imputed by
    interpolating between solvable neighbours, with the boundary limits 1
    below the data and 0 above.  The raw curve is then monotone smoothed.
    """
    x = _values(train)
    u_grid = np.asarray(u_grid, dtype=float)
    if np.any(np.diff(u_grid) <= 0):
        raise ValueError("u_grid must be increasing")
    d = x.shape[1]
    hidden = hidden % d
    rest = [j for j in range(d) if j != hidden]
    obs = np.asarray(obs, dtype=float)
    if obs.size != d - 1:
        raise ValueError(f"expected {d - 1} observed values")
    raw = np.full(u_grid.size, np.nan)
    for i, u in enumerate(u_grid):
        ind = (x > u).astype(float)
        if ind[:, rest].std(axis=0).min() == 0.0 or ind[:, hidden].std() == 0.0:
            continue  # constant indicator somewhere: singular system
        cov = np.cov(ind, rowvar=False, ddof=1)
        try:
            w = _ordinary_krige_weights(cov[np.ix_(rest, rest)], cov[hidden, rest])
        except np.linalg.LinAlgError:
            continue
        raw[i] = w @ (obs > u).astype(float)
    solved = np.isfinite(raw)
    if not solved.any():
        raise ValueError("indicator kriging unsolvable at every threshold")
    raw[~solved] = np.interp(
        u_grid[~solved], u_grid[solved], raw[solved], left=1.0, right=0.0
    )
    raw = np.clip(raw, 0.0, 1.0)
    return monotone_smooth(u_grid, raw)
