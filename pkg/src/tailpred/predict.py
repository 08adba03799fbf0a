"""Conditional density of the hidden component given large observed values.

Given the observed components z_obs of a standardized heavy-tailed vector
and an angular density h, the conditional density of the remaining
component is approximately proportional to the Cartesian point-process
intensity along the line z(t) = (z_obs, t):

    f(t) = ||z(t)||^-(d+1) h(z(t) / ||z(t)||) / D,
    D = integral_0^inf ||z(t)||^-(d+1) h(z(t) / ||z(t)||) dt,

valid when ||z_obs|| is large.  The improper denominator integral is
computed by composite Simpson quadrature after the compactifying
substitution v = t / (t + ||z_obs||), under which ||z(t)|| = ||z_obs|| /
(1 - v) and the hidden coordinate of the angle is exactly v.  The output
is a normalized density on a kernel-adapted grid with CDF and quantile
access, on the Frechet scale and (through a fitted margin) on the
original scale.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .angular import BOUNDARY_TOL

DEFAULT_NODES = 2049
DEFAULT_EPS = 1e-8
DEFAULT_REL_TOL = 1e-6
DEFAULT_GRID_POINTS = 1025
MAX_DOUBLINGS = 6
# output grid spans where the kernel exceeds this fraction of its peak
KERNEL_FLOOR = 1e-8


class QuadratureError(RuntimeError):
    """Denominator quadrature failed to converge at maximum refinement."""


class ThresholdWarning(UserWarning):
    """Conditioning norm below the fitting threshold; approximation suspect."""


@dataclass(frozen=True)
class GridDensity:
    """A normalized density on a strictly increasing grid."""

    grid: np.ndarray
    density: np.ndarray
    cdf_grid: np.ndarray = field(default=None)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        dens = np.asarray(self.density, dtype=float)
        if grid.ndim != 1 or grid.size != dens.size:
            raise ValueError("grid and density must be matched 1-D arrays")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if np.any(dens < 0):
            raise ValueError("density must be nonnegative")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "density", dens)
        if self.cdf_grid is None:
            object.__setattr__(self, "cdf_grid", _cumtrapz(dens, grid))
        else:
            object.__setattr__(self, "cdf_grid", np.asarray(self.cdf_grid, dtype=float))

    def cdf(self, y):
        """P(hidden <= y) by the cumulative trapezoid, clamped outside the grid."""
        return np.interp(y, self.grid, self.cdf_grid, left=0.0, right=1.0)

    def quantile(self, p):
        """Inverse CDF by monotone interpolation."""
        p = np.asarray(p, dtype=float)
        if np.any((p <= 0) | (p >= 1)):
            raise ValueError("probabilities must lie in (0, 1)")
        return np.interp(p, self.cdf_grid, self.grid)

    def pit(self, y):
        """Probability integral transform of an observed value."""
        return float(self.cdf(y))

    def density_at(self, t):
        """Density interpolated at arbitrary points (zero outside the grid)."""
        return np.interp(t, self.grid, self.density, left=0.0, right=0.0)

    def mode(self):
        return float(self.grid[int(np.argmax(self.density))])


@dataclass(frozen=True)
class ConditionalDensity(GridDensity):
    """Approximate conditional density on the Frechet scale.

    normalizer is the denominator integral D; conditioning stores z_obs.
    """

    normalizer: float = float("nan")
    conditioning: np.ndarray = None


@dataclass(frozen=True)
class OriginalScaleDensity(GridDensity):
    """Conditional density back-transformed to the data scale."""

    conditioning: np.ndarray = None


def _cumtrapz(y, x):
    out = np.concatenate([[0.0], np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(x))])
    return out


def _log_kernel(v, z_obs, s, model):
    """Log of ||z(t)||^-(d+1) h(w) at v = t / (t + s), vectorized."""
    d = model.d
    w = np.empty((v.size, d))
    w[:, :-1] = np.outer(1.0 - v, z_obs / s)
    w[:, -1] = v
    return -(d + 1) * (np.log(s) - np.log1p(-v)) + model.log_density(w)


def _simpson(y, step):
    if y.size % 2 == 0:
        raise ValueError("composite Simpson needs an odd number of nodes")
    return step / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-2:2].sum())


def conditional_density(
    z_obs,
    model,
    n_nodes=DEFAULT_NODES,
    eps=DEFAULT_EPS,
    rel_tol=DEFAULT_REL_TOL,
    grid_points=DEFAULT_GRID_POINTS,
    r_star=None,
):
    """Approximate the conditional density of the hidden component.

    z_obs are the d-1 observed Frechet-scale values; model is a fitted
    angular density of dimension d.  When r_star is given and ||z_obs||
    falls below it, a ThresholdWarning is issued (the approximation is
    derived only for large conditioning norms) but the density is still
    produced.

    Quadrature nodes live on v in (eps, 1 - eps), kept clear of the
    simplex boundary; the node count doubles until the denominator changes
    by less than rel_tol, and QuadratureError is raised at max depth.
    """
    z_obs = np.atleast_1d(np.asarray(z_obs, dtype=float))
    if z_obs.size != model.d - 1:
        raise ValueError(f"need {model.d - 1} observed components for d = {model.d}")
    if np.any(z_obs <= 0):
        raise ValueError("observed components must be positive")
    s = float(z_obs.sum())
    if z_obs.min() / s <= 2.0 * BOUNDARY_TOL:
        raise ValueError(
            "conditioning vector too close to the simplex boundary for a "
            "valid angular evaluation"
        )
    if r_star is not None and s < r_star:
        warnings.warn(
            f"conditioning norm {s:.3g} below the fitting threshold {r_star:.3g}; "
            "the point-process approximation may be poor",
            ThresholdWarning,
        )
    # the hidden angle coordinate equals v, the observed ones scale with
    # (1 - v); stay clear of both boundary rejections
    v_lo = max(eps, 1.1 * BOUNDARY_TOL)
    v_hi = min(1.0 - eps, 1.0 - 1.1 * BOUNDARY_TOL * s / z_obs.min())
    if v_hi <= v_lo:
        raise ValueError("degenerate quadrature range; conditioning too imbalanced")

    d = model.d
    n = n_nodes if n_nodes % 2 == 1 else n_nodes + 1
    prev = None
    for _ in range(MAX_DOUBLINGS + 1):
        v = np.linspace(v_lo, v_hi, n)
        log_k = _log_kernel(v, z_obs, s, model)
        # integrand of D in v: kernel * dt/dv, dt/dv = s / (1 - v)^2
        log_g = log_k + np.log(s) - 2.0 * np.log1p(-v)
        g = np.exp(log_g)
        D = _simpson(g, v[1] - v[0])
        if prev is not None and abs(D - prev) <= rel_tol * abs(D):
            break
        prev = D
        n = 2 * n - 1
    else:
        raise QuadratureError(
            f"denominator integral did not converge to rel. tol. {rel_tol:g} "
            f"within {MAX_DOUBLINGS} refinements"
        )
    if not np.isfinite(D) or D <= 0:
        raise QuadratureError("denominator integral is not finite and positive")

    # output grid: quantile-uniform in the kernel mass where the kernel
    # exceeds KERNEL_FLOOR of its peak, plus log-spaced nodes so that the
    # far tails (one mass quantile can span decades of t there) still
    # integrate accurately under the trapezoid rule
    peak = log_k.max()
    above = np.flatnonzero(log_k >= peak + np.log(KERNEL_FLOOR))
    a, b = above[0], above[-1]
    cmass = _cumtrapz(g, v)
    n_q = max(2, (3 * grid_points) // 4)
    levels = np.linspace(cmass[a], cmass[b], n_q)
    v_grid = np.interp(levels, cmass[a : b + 1], v[a : b + 1])
    t_quant = s * v_grid / (1.0 - v_grid)
    t_geo = np.geomspace(t_quant[0], t_quant[-1], max(grid_points - n_q, 2))
    t_grid = np.unique(np.concatenate([t_quant, t_geo]))
    v_out = t_grid / (s + t_grid)
    dens = np.exp(_log_kernel(v_out, z_obs, s, model) - np.log(D))
    # renormalize on the truncated output grid so the mass is exactly one
    mass = np.trapezoid(dens, t_grid)
    dens = dens / mass
    return ConditionalDensity(
        grid=t_grid,
        density=dens,
        cdf_grid=None,
        normalizer=D,
        conditioning=z_obs.copy(),
    )


def back_transform(cd, margin):
    """Map a Frechet-scale conditional density to the original data scale.

    The grid maps through the inverse Frechet transform and the density
    picks up the Jacobian dz/dy = f(y) / (F(y) log^2 F(y)).  The result is
    renormalized on its grid.
    """
    y_grid = margin.from_frechet(cd.grid)
    keep = np.concatenate([[True], np.diff(y_grid) > 0])
    y_grid = y_grid[keep]
    if y_grid.size < 2:
        raise ValueError("margin maps the grid to a degenerate range")
    f_z = cd.density[keep]
    cdf_y = margin.cdf(y_grid)
    # smooth the empirical body density at least to the local grid spacing,
    # otherwise its sawtooth aliases into the trapezoid normalization
    body = y_grid < margin.threshold
    bandwidth = None
    if body.sum() >= 2:
        bandwidth = max(
            (margin.body[-1] - margin.body[0]) / 100.0,
            float(np.diff(y_grid[body]).max()),
        )
    jac = margin.density(y_grid, body_bandwidth=bandwidth) / (
        cdf_y * np.log(cdf_y) ** 2
    )
    g = f_z * jac
    mass = np.trapezoid(g, y_grid)
    if mass <= 0:
        raise ValueError("back-transformed density has no mass on the grid")
    return OriginalScaleDensity(
        grid=y_grid, density=g / mass, cdf_grid=None, conditioning=cd.conditioning
    )


def pit_value(density_obj, y_observed):
    """PIT of the realized value under a grid density, clamped to [0, 1]."""
    return density_obj.pit(y_observed)
