"""Angular model fitting from radially thresholded Frechet-scale data.

Above a high radial threshold the limiting point-process intensity
factorizes into r^-2 dr H(dw), so the likelihood for the angular
parameters reduces to the product of the angular density over the observed
angles; the radial factor is parameter-free once the tail index is
standardized and drops out.  Parameters are searched on unconstrained
transformed scales (log for positive parameters, logit for the logistic
dependence) with a derivative-free simplex method and randomized restarts,
and standard errors come from the central-difference Hessian of the
negative log-likelihood, delta-method mapped back to the natural scale.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .angular import LogisticModel, PairwiseBetaModel, _pair_index

HESSIAN_STEP = 1e-4
MIN_EXCEEDANCES = 20


@dataclass(frozen=True)
class ThresholdedSample:
    """Angles and radii of the observations above the radial threshold."""

    angles: np.ndarray  # (k, d), rows on the simplex
    radii: np.ndarray  # (k,)
    r0: float
    n_total: int

    def __post_init__(self):
        angles = np.asarray(self.angles, dtype=float)
        radii = np.asarray(self.radii, dtype=float)
        if angles.shape[0] != radii.size:
            raise ValueError("angles and radii must align")
        if np.any(radii <= self.r0):
            raise ValueError("all radii must exceed the threshold")
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "radii", radii)

    @property
    def d(self):
        return self.angles.shape[1]

    @property
    def n_used(self):
        return self.radii.size


@dataclass(frozen=True)
class FittedAngularModel:
    """Best-likelihood model with per-parameter standard errors.

    std_errors is None when the Hessian at the optimum was not positive
    definite; the fit itself is still returned.
    """

    model: object
    std_errors: np.ndarray | None
    neg_log_lik: float
    n_used: int
    r0: float = float("nan")
    quantile: float = float("nan")

    def to_dict(self):
        return {
            "family": self.model.family,
            "params": {
                name: float(v)
                for name, v in zip(self.model.param_names, self.model.param_vector)
            },
            "std_errors": None
            if self.std_errors is None
            else [float(s) for s in self.std_errors],
            "nll": self.neg_log_lik,
            "n_used": self.n_used,
            "r0": self.r0,
            "quantile": self.quantile,
        }

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)


def radial_threshold(z_matrix, quantile=0.93):
    """Decompose the rows above the radial quantile into (radius, angle).

    The radius is the L1 norm of the Frechet-scale row; the threshold is
    the empirical quantile of the radii and rows strictly above it are
    retained.
    """
    z = np.asarray(z_matrix, dtype=float)
    if not 0.0 <= quantile < 1.0:
        raise ValueError("quantile must lie in [0, 1)")
    if np.any(z <= 0):
        raise ValueError("Frechet-scale values must be positive")
    r = z.sum(axis=1)
    r0 = float(np.quantile(r, quantile)) if quantile > 0 else 0.0
    keep = r > r0
    k = int(keep.sum())
    if np.ptp(r) == 0:
        raise ValueError("all radii identical; radial threshold undefined")
    if quantile > 0 and k < MIN_EXCEEDANCES:
        raise ValueError(f"only {k} radial exceedances; need {MIN_EXCEEDANCES}")
    return ThresholdedSample(
        angles=z[keep] / r[keep, None], radii=r[keep], r0=r0, n_total=z.shape[0]
    )


def _logit(p):
    return math.log(p / (1.0 - p))


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


class _Family:
    """Transformed-coordinate view of one model family."""

    def __init__(self, family, d):
        if family == "logistic":
            if d not in (2, 3):
                raise ValueError("logistic angular fitting needs d = 2 or 3")
            self.n_params = 1
        elif family == "pairwise_beta":
            if d < 3:
                raise ValueError("pairwise beta needs d >= 3")
            self.n_params = 1 + d * (d - 1) // 2
        else:
            raise ValueError(f"unknown family {family!r}")
        self.family = family
        self.d = d

    def build(self, x):
        if self.family == "logistic":
            return LogisticModel(beta=float(_sigmoid(x[0])), d=self.d)
        theta = np.exp(x)
        return PairwiseBetaModel(gamma=float(theta[0]), beta=tuple(theta[1:]), d=self.d)

    def start(self, rng, restart):
        if self.family == "logistic":
            base = np.array([_logit(0.5)])
        else:
            base = np.zeros(self.n_params)  # gamma = beta_jk = 1
        if restart == 0:
            return base
        return base + rng.normal(scale=0.75, size=self.n_params)

    def jacobian_diag(self, x):
        """d(natural)/d(transformed), for the delta method."""
        if self.family == "logistic":
            b = _sigmoid(x[0])
            return np.array([b * (1.0 - b)])
        return np.exp(x)


def _neg_log_lik(x, family, angles):
    try:
        model = family.build(x)
    except (ValueError, OverflowError):
        return np.inf
    ld = model.log_density(angles)
    if not np.all(np.isfinite(ld)):
        return np.inf
    return -float(ld.sum())


def _hessian(f, x, step=HESSIAN_STEP):
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


def fit(sample, family, starts=5, seed=0, quantile=float("nan")):
    """Maximize the angular log-likelihood over the thresholded angles.

    Runs `starts` randomized Nelder-Mead restarts and keeps the lowest
    negative log-likelihood (ties broken by restart index).  Raises if no
    restart converges; returns std_errors = None when the Hessian at the
    optimum is not positive definite.
    """
    if sample.n_used < 2:
        raise ValueError("insufficient data: need at least 2 thresholded points")
    fam = _Family(family, sample.d)
    rng = np.random.default_rng(seed)
    best = None
    for s in range(starts):
        x0 = fam.start(rng, s)
        res = minimize(
            _neg_log_lik,
            x0,
            args=(fam, sample.angles),
            method="Nelder-Mead",
            options={"xatol": 1e-8, "fatol": 1e-10, "maxfev": 10000},
        )
        if not np.isfinite(res.fun):
            continue
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise RuntimeError("all restarts failed to converge")
    x = best.x
    hess = _hessian(lambda v: _neg_log_lik(v, fam, sample.angles), x)
    std_errors = None
    try:
        eig = np.linalg.eigvalsh(hess)
        if np.all(eig > 0):
            cov = np.linalg.inv(hess)
            jac = fam.jacobian_diag(x)
            std_errors = np.sqrt(np.diag(cov)) * jac
        else:
            warnings.warn("angular likelihood Hessian not positive definite; no SEs")
    except np.linalg.LinAlgError:
        warnings.warn("angular likelihood Hessian singular; no SEs")
    return FittedAngularModel(
        model=fam.build(x),
        std_errors=std_errors,
        neg_log_lik=float(best.fun),
        n_used=sample.n_used,
        r0=sample.r0,
        quantile=quantile,
    )


def profile_sensitivity(z_matrix, family, quantiles, starts=5, seed=0):
    """Refit across radial thresholds; a flat profile supports the choice.

    Returns a list of FittedAngularModel, one per quantile.
    """
    out = []
    for q in quantiles:
        sample = radial_threshold(z_matrix, quantile=q)
        out.append(fit(sample, family, starts=starts, seed=seed, quantile=q))
    return out
