"""Semi-parametric marginal models: empirical body, generalized Pareto tail.

Each column of a multivariate series gets its own margin: the empirical
distribution below a high threshold u (the configured quantile of the
column), the maximum-likelihood GPD above it, blended through the observed
exceedance probability zeta = P(Y > u).  The fitted margin maps data to
and from the unit Frechet scale via z = (-log F(y))^(-1), which is where
the angular-measure machinery operates.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

# CDF values are clamped inside (EPS, 1 - EPS) so the Frechet transform and
# its inverse stay finite.
EPS = 1e-12
# below this |xi| the GPD formulas switch to their exponential limits
XI_TOL = 1e-6
MIN_EXCEEDANCES = 30


@dataclass(frozen=True)
class GpdFit:
    """Maximum-likelihood GPD fit to threshold excesses.

    Parametrization P(Y > u + e | Y > u) = (1 + xi e / psi)_+^(-1/xi),
    scale psi > 0, shape xi (tail index 1/xi when xi > 0).
    """

    threshold: float
    psi: float
    xi: float
    se_psi: float
    se_xi: float
    n_exceed: int

    def __post_init__(self):
        if self.psi <= 0:
            raise ValueError("GPD scale must be positive")
        if self.n_exceed < MIN_EXCEEDANCES:
            raise ValueError(f"need at least {MIN_EXCEEDANCES} exceedances")


def _gpd_nll(x, excesses):
    """Negative log-likelihood in transformed coordinates (log psi, xi).

    log1p keeps the xi -> 0 limit smooth, so the switch to the exponential
    formula only guards the exactly-degenerate neighbourhood; a wider switch
    would put a seam in the function right where the finite-difference
    Hessian probes it for near-Gumbel data.
    """
    psi = math.exp(x[0])
    xi = x[1]
    k = excesses.size
    if abs(xi) < 1e-12:
        return k * x[0] + excesses.sum() / psi
    t = xi * excesses / psi
    if np.any(t <= -1.0):
        return np.inf
    return k * x[0] + (1.0 / xi + 1.0) * np.log1p(t).sum()


def _hessian(f, x, step=1e-4):
    """Central-difference Hessian of a scalar function."""
    n = x.size
    h = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            ei = np.zeros(n)
            ej = np.zeros(n)
            ei[i] = step
            ej[j] = step
            h[i, j] = h[j, i] = (
                f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)
            ) / (4.0 * step * step)
    return h


def mean_residual_life(column, candidate_thresholds):
    """Mean excess over each candidate threshold, with standard errors.

    Returns a list of (u, mean excess, standard error).  A roughly linear
    mean-excess curve above u supports a GPD tail there; this is a
    diagnostic, threshold choice stays a configuration input.
    """
    y = np.asarray(column, dtype=float)
    out = []
    for u in np.asarray(candidate_thresholds, dtype=float):
        exc = y[y > u] - u
        if exc.size == 0:
            raise ValueError(f"threshold {u} is above the sample maximum")
        if exc.size < 2:
            raise ValueError(f"need at least 2 exceedances above {u}")
        out.append((float(u), float(exc.mean()), float(exc.std(ddof=1) / math.sqrt(exc.size))))
    return out


def fit_gpd(column, threshold_quantile=0.93):
    """Fit a GPD to the excesses above the empirical threshold quantile.

    Optimizes the likelihood over (log psi, xi) with Nelder-Mead from
    moment-based starting values; standard errors come from the numerical
    Hessian of the negative log-likelihood, delta-method mapped back to
    the natural scale.
    """
    y = np.asarray(column, dtype=float)
    u = float(np.quantile(y, threshold_quantile))
    exc = y[y > u] - u
    if exc.size < MIN_EXCEEDANCES:
        raise ValueError(
            f"only {exc.size} exceedances above the {threshold_quantile} quantile; "
            f"need {MIN_EXCEEDANCES}"
        )
    if np.ptp(exc) == 0:
        raise ValueError("all excesses equal; GPD fit undefined")
    m, s2 = exc.mean(), exc.var(ddof=1)
    xi0 = 0.5 * (1.0 - m * m / s2)
    xi0 = float(np.clip(xi0, -0.4, 0.4))
    psi0 = max(m * (1.0 - xi0), 1e-8)
    res = minimize(
        _gpd_nll,
        np.array([math.log(psi0), xi0]),
        args=(exc,),
        method="Nelder-Mead",
        options={"xatol": 1e-8, "fatol": 1e-10, "maxfev": 10000},
    )
    if not res.success or not np.isfinite(res.fun):
        raise RuntimeError(f"GPD optimizer failed: {res.message}")
    psi, xi = math.exp(res.x[0]), float(res.x[1])
    hess = _hessian(lambda x: _gpd_nll(x, exc), res.x)
    se_psi = se_xi = float("nan")
    try:
        cov = np.linalg.inv(hess)
        if np.all(np.linalg.eigvalsh(hess) > 0):
            se_psi = psi * math.sqrt(cov[0, 0])  # delta method for psi = exp(x0)
            se_xi = math.sqrt(cov[1, 1])
        else:
            warnings.warn("GPD Hessian not positive definite; no standard errors")
    except np.linalg.LinAlgError:
        warnings.warn("GPD Hessian singular; no standard errors")
    return GpdFit(
        threshold=u, psi=psi, xi=xi, se_psi=se_psi, se_xi=se_xi, n_exceed=int(exc.size)
    )


@dataclass(frozen=True)
class MarginModel:
    """Blended empirical-body / GPD-tail marginal distribution.

    F(y) = (#{x <= y} / n, linearly interpolated)      for y <= u
    F(y) = 1 - zeta (1 + xi (y - u) / psi)_+^(-1/xi)   for y >  u

    where zeta is the observed exceedance proportion, so F(u) = 1 - zeta
    on both branches.
    """

    gpd: GpdFit
    body: np.ndarray  # sorted training values <= threshold
    zeta: float  # observed P(Y > u)
    name: str = ""
    _body_cdf: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        body = np.sort(np.asarray(self.body, dtype=float))
        if body.size == 0:
            raise ValueError("empty body sample")
        if not 0.0 < self.zeta < 1.0:
            raise ValueError("exceedance probability must lie in (0, 1)")
        if body[-1] > self.gpd.threshold:
            raise ValueError("body values must not exceed the threshold")
        object.__setattr__(self, "body", body)
        n = body.size / (1.0 - self.zeta)  # implied total sample size
        object.__setattr__(self, "_body_cdf", np.arange(1, body.size + 1) / n)

    @property
    def threshold(self):
        return self.gpd.threshold

    def cdf(self, y):
        """Blended CDF, clamped to (EPS, 1 - EPS)."""
        y = np.asarray(y, dtype=float)
        squeeze = y.ndim == 0
        y = np.atleast_1d(y)
        out = np.empty_like(y)
        u, psi, xi, zeta = self.threshold, self.gpd.psi, self.gpd.xi, self.zeta
        lo = y < u
        out[lo] = np.interp(y[lo], self.body, self._body_cdf, left=EPS)
        e = y[~lo] - u
        if abs(xi) < XI_TOL:
            surv = np.exp(-e / psi)
        else:
            surv = np.maximum(1.0 + xi * e / psi, 0.0) ** (-1.0 / xi)
        out[~lo] = 1.0 - zeta * surv
        out = np.clip(out, EPS, 1.0 - EPS)
        return float(out[0]) if squeeze else out

    def density(self, y, body_bandwidth=None):
        """Derivative of the blended CDF.

        Tail branch is the closed-form GPD density scaled by zeta; the body
        branch is a central finite difference of the empirical CDF with a
        smoothing bandwidth (default: 1/100 of the body range).
        """
        y = np.asarray(y, dtype=float)
        squeeze = y.ndim == 0
        y = np.atleast_1d(y)
        out = np.empty_like(y)
        u, psi, xi, zeta = self.threshold, self.gpd.psi, self.gpd.xi, self.zeta
        lo = y < u
        if lo.any():
            h = body_bandwidth
            if h is None:
                h = max((self.body[-1] - self.body[0]) / 100.0, 1e-12)
            out[lo] = (self.cdf(np.minimum(y[lo] + h, u)) - self.cdf(y[lo] - h)) / (
                np.minimum(y[lo] + h, u) - (y[lo] - h)
            )
        e = y[~lo] - u
        if abs(xi) < XI_TOL:
            out[~lo] = zeta / psi * np.exp(-e / psi)
        else:
            t = np.maximum(1.0 + xi * e / psi, 0.0)
            out[~lo] = np.where(t > 0, zeta / psi * t ** (-1.0 / xi - 1.0), 0.0)
        return float(out[0]) if squeeze else out

    def quantile(self, p):
        """Inverse of the blended CDF."""
        p = np.asarray(p, dtype=float)
        squeeze = p.ndim == 0
        p = np.atleast_1d(p)
        if np.any((p <= 0) | (p >= 1)):
            raise ValueError("probabilities must lie in (0, 1)")
        out = np.empty_like(p)
        u, psi, xi, zeta = self.threshold, self.gpd.psi, self.gpd.xi, self.zeta
        hi = p > 1.0 - zeta
        out[~hi] = np.interp(p[~hi], self._body_cdf, self.body)
        q = (1.0 - p[hi]) / zeta
        if abs(xi) < XI_TOL:
            out[hi] = u - psi * np.log(q)
        else:
            out[hi] = u + psi / xi * (q ** (-xi) - 1.0)
        return float(out[0]) if squeeze else out

    def to_frechet(self, y):
        """Unit Frechet transform z = (-log F(y))^(-1), strictly positive."""
        f = self.cdf(y)
        return -1.0 / np.log(f)

    def from_frechet(self, z):
        """Inverse transform; closed-form GPD quantile above the threshold,
        interpolated empirical quantile below."""
        z = np.asarray(z, dtype=float)
        if np.any(z <= 0):
            raise ValueError("Frechet-scale values must be positive")
        p = np.exp(-1.0 / z)
        return self.quantile(np.clip(p, EPS, 1.0 - EPS))

    def to_dict(self):
        g = self.gpd
        return {
            "name": self.name,
            "u": g.threshold,
            "psi": g.psi,
            "xi": g.xi,
            "se_psi": g.se_psi,
            "se_xi": g.se_xi,
            "zeta_bar": self.zeta,
            "body": self.body.tolist(),
        }

    @classmethod
    def from_dict(cls, doc):
        gpd = GpdFit(
            threshold=doc["u"],
            psi=doc["psi"],
            xi=doc["xi"],
            se_psi=doc["se_psi"],
            se_xi=doc["se_xi"],
            n_exceed=max(
                MIN_EXCEEDANCES,
                int(round(len(doc["body"]) * doc["zeta_bar"] / (1 - doc["zeta_bar"]))),
            ),
        )
        return cls(gpd=gpd, body=np.asarray(doc["body"]), zeta=doc["zeta_bar"], name=doc["name"])


def fit_margin(column, threshold_quantile=0.93, name=""):
    """Fit the full semi-parametric margin to one column."""
    y = np.asarray(column, dtype=float)
    gpd = fit_gpd(y, threshold_quantile)
    body = y[y <= gpd.threshold]
    zeta = gpd.n_exceed / y.size
    return MarginModel(gpd=gpd, body=body, zeta=zeta, name=name)


def save_margins(margins, path):
    with open(path, "w") as f:
        json.dump([m.to_dict() for m in margins], f, indent=2)


def load_margins(path):
    with open(path) as f:
        return [MarginModel.from_dict(doc) for doc in json.load(f)]
