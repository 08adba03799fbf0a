"""Symmetric logistic max-stable vectors with unit Frechet margins.

Provides the sampler used by the calibration experiments together with the
closed-form joint CDF and, for d = 2 and 3, the exact joint and conditional
densities that serve as oracles for the conditional-density approximation.

The sampler uses the positive-stable mixture representation: with S a
positive beta-stable variable (Laplace transform exp(-t^beta)) and E_j
i.i.d. unit exponentials, Z_j = (S / E_j)^beta has joint CDF
exp(-(sum_j z_j^(-1/beta))^beta) and unit Frechet margins.  S is drawn by
the Chambers-Mallows-Stuck construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Rows are generated in fixed-size blocks, each from its own spawned
# SeedSequence child, so results are reproducible given (seed, n, d, beta)
# no matter how blocks are distributed over threads.
BLOCK_SIZE = 4096


@dataclass(frozen=True)
class LogisticSample:
    """n x d draws from the symmetric logistic with dependence beta."""

    values: np.ndarray
    beta: float
    seed: int

    def __post_init__(self):
        if np.any(self.values <= 0):
            raise ValueError("logistic samples must be strictly positive")


def _positive_stable(rng, beta, size):
    """Positive beta-stable draws, Laplace transform exp(-t^beta)."""
    u = rng.uniform(0.0, np.pi, size)
    w = rng.standard_exponential(size)
    return (
        (np.sin((1.0 - beta) * u) / w) ** ((1.0 - beta) / beta)
        * np.sin(beta * u)
        / np.sin(u) ** (1.0 / beta)
    )


def sample_logistic(n, d, beta, seed):
    """Draw n i.i.d. d-variate symmetric logistic vectors.

    Joint CDF exp(-(sum_j z_j^(-1/beta))^beta), beta in (0, 1].  beta = 1
    gives independent unit Frechet components (the stable mixing variable
    degenerates at 1).
    """
    if n < 1 or d < 2:
        raise ValueError("need n >= 1 and d >= 2")
    if not 0.0 < beta <= 1.0:
        raise ValueError("beta must lie in (0, 1]")
    out = np.empty((n, d))
    n_blocks = (n + BLOCK_SIZE - 1) // BLOCK_SIZE
    children = np.random.SeedSequence(seed).spawn(n_blocks)
    for b, child in enumerate(children):
        rng = np.random.default_rng(child)
        lo, hi = b * BLOCK_SIZE, min((b + 1) * BLOCK_SIZE, n)
        m = hi - lo
        if beta == 1.0:
            s = np.ones(m)
        else:
            s = _positive_stable(rng, beta, m)
        e = rng.standard_exponential((m, d))
        out[lo:hi] = (s[:, None] / e) ** beta
    return LogisticSample(values=out, beta=beta, seed=seed)


def logistic_cdf(z, beta):
    """Joint CDF exp(-(sum_j z_j^(-1/beta))^beta) at positive z.

    Accepts a single point (shape (d,)) or a batch (shape (n, d)).
    """
    z = np.asarray(z, dtype=float)
    squeeze = z.ndim == 1
    z = np.atleast_2d(z)
    if np.any(z <= 0):
        raise ValueError("CDF defined for strictly positive arguments")
    v = (z ** (-1.0 / beta)).sum(axis=1) ** beta
    out = np.exp(-v)
    return float(out[0]) if squeeze else out


def logistic_joint_density(z, beta):
    """Exact joint density of the logistic for d = 2 or 3.

    Obtained by differentiating the closed-form CDF: with
    S = sum_j z_j^(-1/beta),

        d = 2:  exp(-S^b) (z1 z2)^(-1/b-1) S^(b-2) [S^b + (1/b - 1)]
        d = 3:  exp(-S^b) (z1 z2 z3)^(-1/b-1) [(1/b-1)(2/b-1) S^(b-3)
                  + 3 (1/b-1) S^(2b-3) + S^(3b-3)]
    """
    z = np.asarray(z, dtype=float)
    squeeze = z.ndim == 1
    z = np.atleast_2d(z)
    d = z.shape[1]
    if d not in (2, 3):
        raise ValueError("closed-form joint density available for d = 2 or 3 only")
    if np.any(z <= 0):
        raise ValueError("density defined for strictly positive arguments")
    b = beta
    logz = np.log(z)
    log_s = _logsumexp_rows(-logz / b)
    ga = np.exp(-np.exp(b * log_s)) * np.exp((-1.0 / b - 1.0) * logz.sum(axis=1))
    if d == 2:
        poly = np.exp((b - 2.0) * log_s) * (np.exp(b * log_s) + (1.0 / b - 1.0))
    else:
        poly = (
            (1.0 / b - 1.0) * (2.0 / b - 1.0) * np.exp((b - 3.0) * log_s)
            + 3.0 * (1.0 / b - 1.0) * np.exp((2.0 * b - 3.0) * log_s)
            + np.exp((3.0 * b - 3.0) * log_s)
        )
    out = ga * poly
    return float(out[0]) if squeeze else out


def _logsumexp_rows(a):
    m = a.max(axis=1, keepdims=True)
    return (m + np.log(np.exp(a - m).sum(axis=1, keepdims=True))).ravel()


def exact_conditional_oracle(z_obs, beta, grid):
    """Exact conditional density of the last component given the others.

    Evaluates the closed-form joint density of the (d_obs + 1)-variate
    logistic at (z_obs, t) over the grid and normalizes by the trapezoid
    rule, so the result is a proper density on the grid.  Available for
    d_obs + 1 in {2, 3}.
    """
    z_obs = np.atleast_1d(np.asarray(z_obs, dtype=float))
    grid = np.asarray(grid, dtype=float)
    pts = np.column_stack([np.tile(z_obs, (grid.size, 1)), grid])
    dens = logistic_joint_density(pts, beta)
    mass = np.trapezoid(dens, grid)
    if mass <= 0:
        raise ValueError("grid does not capture any conditional mass")
    return dens / mass
