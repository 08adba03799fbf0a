"""Angular densities on the L1 unit simplex.

A heavy-tailed random vector with standardized margins concentrates its
extremal dependence in a probability measure H on the simplex
S = {w : w_j >= 0, sum w_j = 1}.  This module provides two parametric
families for the density h of H:

* the symmetric logistic family (d = 2 and d = 3), whose density is
  normalized with respect to Lebesgue measure on the projected simplex
  (the first d-1 coordinates), and
* the pairwise beta family (d >= 3), one global concentration parameter
  gamma and one dependence parameter per coordinate pair, normalized with
  respect to the surface measure on the embedded simplex (which carries an
  extra factor sqrt(d) relative to the projected parametrization).

Both are evaluated in log space throughout: the pairwise beta terms
overflow for large pair parameters, and the logistic density involves
w_j^(-1/beta) factors that overflow near the boundary.

The module also exposes the Cartesian intensity lam(z) =
||z||^-(d+1) h(z / ||z||), the density of the limiting point-process
intensity measure in Cartesian coordinates, which is the kernel of the
conditional-density approximation in :mod:`tailpred.predict`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

BOUNDARY_TOL = 1e-10


class BoundaryEvaluation(ValueError):
    """Raised when a density is evaluated too close to the simplex boundary."""


def _check_simplex(w, d=None):
    """Validate and renormalize points on the simplex.

    Accepts a single point (shape (d,)) or a batch (shape (n, d)).
    Returns a 2-D float array with rows renormalized to sum exactly to 1.
    Rows must be nonnegative and within 1e-12 of unit sum before the
    renormalization.
    """
    w = np.atleast_2d(np.asarray(w, dtype=float))
    if d is not None and w.shape[1] != d:
        raise ValueError(f"expected points of dimension {d}, got {w.shape[1]}")
    if np.any(w < 0):
        raise ValueError("simplex coordinates must be nonnegative")
    sums = w.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > 1e-12 * np.maximum(1.0, sums)):
        raise ValueError("coordinates must sum to 1 within 1e-12")
    return w / sums[:, None]


def _reject_boundary(w):
    if np.any(w < BOUNDARY_TOL):
        raise BoundaryEvaluation(
            f"simplex coordinate below {BOUNDARY_TOL:g}; boundary evaluations "
            "are rejected (densities may diverge or vanish there)"
        )


@dataclass(frozen=True)
class LogisticModel:
    """Symmetric logistic angular density, d = 2 or 3.

    beta in (0, 1]: beta -> 0 is complete dependence, beta = 1 independence
    (the angular density vanishes on the interior, all mass sits on the
    vertices).
    """

    beta: float
    d: int = 2

    family = "logistic"
    reference_measure = "lebesgue"

    def __post_init__(self):
        if not 0.0 < self.beta <= 1.0:
            raise ValueError("beta must lie in (0, 1]")
        if self.d not in (2, 3):
            raise ValueError("closed-form logistic angular density needs d = 2 or 3")

    def log_density(self, w):
        """Log angular density at simplex point(s) w.

        Returns a scalar for a single point, an array for a batch.
        Raises BoundaryEvaluation if any coordinate is below 1e-10.
        """
        w = _check_simplex(w, self.d)
        _reject_boundary(w)
        b = self.beta
        squeeze = w.shape[0] == 1
        if b == 1.0:
            out = np.full(w.shape[0], -np.inf)
            return out[0] if squeeze else out
        logw = np.log(w)
        # log sum_j w_j^(-1/beta), stable for tiny coordinates
        lse = logsumexp(-logw / b, axis=1)
        if self.d == 2:
            out = (
                math.log(0.5)
                + math.log(1.0 / b - 1.0)
                + (-1.0 / b - 1.0) * logw.sum(axis=1)
                + (b - 2.0) * lse
            )
        else:
            out = (
                math.log(1.0 / 3.0)
                + math.log(1.0 / b - 1.0)
                + math.log(2.0 / b - 1.0)
                + (-1.0 / b - 1.0) * logw.sum(axis=1)
                + (b - 3.0) * lse
            )
        return out[0] if squeeze else out

    def density(self, w):
        return np.exp(self.log_density(w))

    def to_dict(self):
        return {"family": "logistic", "d": self.d, "params": {"beta": self.beta}}

    @property
    def param_vector(self):
        return np.array([self.beta])

    @property
    def param_names(self):
        return ["beta"]


def _pair_index(d):
    """Pairs (j, k), j < k, in lexicographic order, 0-based."""
    return [(j, k) for j in range(d) for k in range(j + 1, d)]


def log_pairwise_beta_constant(gamma, d):
    """log K_d(gamma), the pairwise beta normalizing constant."""
    return (
        math.log(2.0)
        + gammaln(d - 2)  # (d-3)!
        - math.log(d)
        - math.log(d - 1)
        - 0.5 * math.log(d)
        + gammaln(gamma * d + 1.0)
        - gammaln(2.0 * gamma + 1.0)
        - gammaln(gamma * (d - 2))
    )


@dataclass(frozen=True)
class PairwiseBetaModel:
    """Pairwise beta angular density for d >= 3.

    gamma > 0 is a global concentration parameter; beta is the flat vector
    of pairwise dependence parameters beta_{j,k} > 0 in (j, k) lexicographic
    order, length d(d-1)/2.  Larger beta_{j,k} means stronger tail
    dependence between components j and k.
    """

    gamma: float
    beta: tuple
    d: int

    family = "pairwise_beta"
    reference_measure = "surface"

    def __post_init__(self):
        if self.d < 3:
            raise ValueError("pairwise beta model requires d >= 3")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        beta = tuple(float(b) for b in self.beta)
        if len(beta) != self.d * (self.d - 1) // 2:
            raise ValueError(
                f"need {self.d * (self.d - 1) // 2} pairwise parameters, got {len(beta)}"
            )
        if any(b <= 0 for b in beta):
            raise ValueError("all pairwise parameters must be positive")
        object.__setattr__(self, "beta", beta)

    def beta_matrix(self):
        """Symmetric d x d matrix of pairwise parameters (diagonal zero)."""
        m = np.zeros((self.d, self.d))
        for (j, k), b in zip(_pair_index(self.d), self.beta):
            m[j, k] = m[k, j] = b
        return m

    def log_density(self, w):
        """Log angular density at simplex point(s) w, via log-sum-exp over pairs."""
        w = _check_simplex(w, self.d)
        _reject_boundary(w)
        squeeze = w.shape[0] == 1
        d, g = self.d, self.gamma
        logw = np.log(w)
        terms = np.empty((w.shape[0], len(self.beta)))
        for i, ((j, k), b) in enumerate(zip(_pair_index(d), self.beta)):
            s = w[:, j] + w[:, k]
            logs = np.log(s)
            # sum of the remaining coordinates; avoids 1 - s cancellation
            rest = w.sum(axis=1) - s
            terms[:, i] = (
                (2.0 * g - 1.0) * logs
                + (g * (d - 2) - d + 2.0) * np.log(rest)
                + gammaln(2.0 * b)
                - 2.0 * gammaln(b)
                + (b - 1.0) * (logw[:, j] + logw[:, k] - 2.0 * logs)
            )
        out = log_pairwise_beta_constant(g, d) + logsumexp(terms, axis=1)
        return out[0] if squeeze else out

    def density(self, w):
        return np.exp(self.log_density(w))

    def sample_angles(self, n, seed):
        """Draw n points exactly from the angular measure.

        Each pairwise term factorizes under the stick-breaking map
        w -> (s, phi, v) with s = w_j + w_k, phi = w_j / s and v the
        relative weights of the remaining coordinates: s ~ Beta(2 gamma +
        1, gamma (d - 2)), phi ~ Beta(beta_jk, beta_jk), v uniform on its
        simplex, and every term carries the same total mass.  Sampling is
        therefore an equal-weight mixture over pairs.
        """
        rng = np.random.default_rng(seed)
        d, g = self.d, self.gamma
        pairs = _pair_index(d)
        which = rng.integers(0, len(pairs), size=n)
        s = rng.beta(2.0 * g + 1.0, g * (d - 2), size=n)
        out = np.empty((n, d))
        for i in range(n):
            j, k = pairs[which[i]]
            b = self.beta[which[i]]
            phi = rng.beta(b, b)
            rest = [l for l in range(d) if l not in (j, k)]
            v = rng.dirichlet(np.ones(d - 2))
            out[i, j] = s[i] * phi
            out[i, k] = s[i] * (1.0 - phi)
            out[i, rest] = (1.0 - s[i]) * v
        return out

    def to_dict(self):
        return {
            "family": "pairwise_beta",
            "d": self.d,
            "params": {"gamma": self.gamma, "beta": list(self.beta)},
        }

    @property
    def param_vector(self):
        return np.concatenate([[self.gamma], self.beta])

    @property
    def param_names(self):
        return ["gamma"] + [f"beta_{j + 1}{k + 1}" for j, k in _pair_index(self.d)]


def model_from_dict(doc):
    """Rebuild a model from its JSON dict form."""
    family = doc["family"]
    if family == "logistic":
        return LogisticModel(beta=doc["params"]["beta"], d=doc["d"])
    if family == "pairwise_beta":
        return PairwiseBetaModel(
            gamma=doc["params"]["gamma"], beta=tuple(doc["params"]["beta"]), d=doc["d"]
        )
    raise ValueError(f"unknown angular model family {family!r}")


def save_model(model, path):
    with open(path, "w") as f:
        json.dump(model.to_dict(), f, indent=2)


def load_model(path):
    with open(path) as f:
        return model_from_dict(json.load(f))


def logistic_density(w, beta, d=None):
    """Symmetric logistic angular density h(w) for d = 2 or 3."""
    if d is None:
        d = np.atleast_2d(np.asarray(w)).shape[1]
    return LogisticModel(beta=beta, d=d).density(w)


def pairwise_beta_density(w, gamma, beta):
    """Pairwise beta angular density h(w).

    beta may be the flat (j, k)-lexicographic vector or the symmetric
    matrix of pairwise parameters.
    """
    w2 = np.atleast_2d(np.asarray(w))
    d = w2.shape[1]
    beta = np.asarray(beta, dtype=float)
    if beta.ndim == 2:
        beta = np.array([beta[j, k] for j, k in _pair_index(d)])
    return PairwiseBetaModel(gamma=gamma, beta=tuple(beta), d=d).density(w)


def cartesian_intensity(z, model):
    """Point-process intensity ||z||_1^-(d+1) h(z / ||z||_1) at z != 0.

    Homogeneous of order -(d+1): intensity(s z) = s^-(d+1) intensity(z).
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    if z.shape[1] != model.d:
        raise ValueError(f"points must have dimension {model.d}")
    if np.any(z < 0):
        raise ValueError("components must be nonnegative")
    r = z.sum(axis=1)
    if np.any(r <= 0):
        raise ValueError("z must be nonzero")
    out = np.exp(-(model.d + 1) * np.log(r) + model.log_density(z / r[:, None]))
    return out[0] if out.shape[0] == 1 and np.asarray(z).ndim else out


def _dirichlet_log_density(w, alpha):
    """Log density of Dirichlet(alpha, ..., alpha) w.r.t. Lebesgue measure
    on the projected simplex (first d-1 coordinates free)."""
    d = w.shape[1]
    return (
        gammaln(d * alpha)
        - d * gammaln(alpha)
        + (alpha - 1.0) * np.log(w).sum(axis=1)
    )


def simplex_mc_integrals(model, n_mc=10**6, seed=0, alpha=1.0 / 3.0):
    """Importance-sampled simplex integrals of the angular measure.

    Estimates the total mass integral h dH and the first moments
    integral w_j dH, j = 1..d, with Monte Carlo standard errors.  The
    proposal is Dirichlet(alpha, ..., alpha) with alpha < 1, which puts
    mass near the boundary so that the integrable edge singularities of
    both families keep the importance weights square-integrable (a uniform
    proposal does not for small gamma or beta near 1).  Points within the
    boundary rejection tolerance are dropped; they carry negligible mass.

    Returns dict with 'mass', 'mass_se', 'moments' (d,), 'moment_se' (d,).
    """
    rng = np.random.default_rng(seed)
    d = model.d
    w = rng.dirichlet(np.full(d, alpha), size=n_mc)
    keep = np.all(w >= BOUNDARY_TOL, axis=1)
    w = w[keep]
    log_h = model.log_density(w)
    log_q = _dirichlet_log_density(w, alpha)
    weights = np.exp(log_h - log_q)
    if model.reference_measure == "surface":
        weights = weights * math.sqrt(d)
    n = weights.size
    mass = weights.mean()
    mass_se = weights.std(ddof=1) / math.sqrt(n)
    mw = weights[:, None] * w
    moments = mw.mean(axis=0)
    moment_se = mw.std(axis=0, ddof=1) / math.sqrt(n)
    return {"mass": mass, "mass_se": mass_se, "moments": moments, "moment_se": moment_se}


def moment_check(model, n_mc=10**6, seed=0, return_se=False):
    """Monte Carlo estimates of the d first moments integral w_j dH.

    For a valid angular measure with standardized margins each moment
    equals 1/d.
    """
    est = simplex_mc_integrals(model, n_mc=n_mc, seed=seed)
    if return_se:
        return est["moments"], est["moment_se"]
    return est["moments"]


def mc_normalization(model, n_mc=10**6, seed=0):
    """Monte Carlo estimate (value, stderr) of the total angular mass."""
    est = simplex_mc_integrals(model, n_mc=n_mc, seed=seed)
    return est["mass"], est["mass_se"]
