"""Tests for the angular density families."""

import math

import numpy as np
import pytest
from scipy import integrate

from tailpred.angular import (
    BoundaryEvaluation,
    LogisticModel,
    PairwiseBetaModel,
    cartesian_intensity,
    log_pairwise_beta_constant,
    logistic_density,
    mc_normalization,
    model_from_dict,
    moment_check,
    pairwise_beta_density,
)

TABLE2_GAMMA = 0.37
TABLE2_BETA = (0.51, 0.64, 0.56, 6.11, 0.76, 1.64, 0.96, 0.56, 0.98, 1.01)


class TestLogistic:
    def test_beta_one_vanishes(self):
        m = LogisticModel(beta=1.0, d=2)
        assert m.density([0.4, 0.6]) == 0.0
        m3 = LogisticModel(beta=1.0, d=3)
        assert m3.density([0.2, 0.3, 0.5]) == 0.0

    def test_trivariate_permutation_symmetry(self):
        m = LogisticModel(beta=0.3, d=3)
        w = np.array([0.1, 0.35, 0.55])
        vals = [m.density(w[list(p)]) for p in [(0, 1, 2), (1, 2, 0), (2, 0, 1), (0, 2, 1)]]
        np.testing.assert_allclose(vals, vals[0], rtol=1e-12)

    def test_bivariate_normalization_quadrature(self):
        # independent oracle: adaptive quadrature of the closed form over (0,1)
        m = LogisticModel(beta=0.3, d=2)
        val, err = integrate.quad(
            lambda w: m.density([w, 1.0 - w]), 1e-9, 1.0 - 1e-9, limit=200
        )
        assert abs(val - 1.0) < 1e-6

    def test_trivariate_normalization_quadrature(self):
        m = LogisticModel(beta=0.5, d=3)

        def inner(w1):
            f = lambda w2: m.density([w1, w2, 1.0 - w1 - w2])
            v, _ = integrate.quad(f, 1e-9, 1.0 - w1 - 1e-9, limit=100)
            return v

        val, _ = integrate.quad(inner, 1e-9, 1.0 - 2e-9, limit=100)
        assert abs(val - 1.0) < 1e-4

    def test_boundary_rejected(self):
        m = LogisticModel(beta=0.3, d=2)
        with pytest.raises(BoundaryEvaluation):
            m.density([1e-12, 1.0 - 1e-12])

    def test_parameter_domain(self):
        with pytest.raises(ValueError):
            LogisticModel(beta=0.0, d=2)
        with pytest.raises(ValueError):
            LogisticModel(beta=1.2, d=2)
        with pytest.raises(ValueError):
            LogisticModel(beta=0.5, d=4)

    def test_log_density_matches_direct_evaluation(self):
        # direct formula without log-space tricks, on points where it is safe
        b = 0.45
        m = LogisticModel(beta=b, d=3)
        rng = np.random.default_rng(1)
        w = rng.dirichlet([5, 5, 5], size=50)
        s = (w ** (-1.0 / b)).sum(axis=1)
        direct = (
            (1.0 / 3.0)
            * (1.0 / b - 1.0)
            * (2.0 / b - 1.0)
            * np.prod(w, axis=1) ** (-1.0 / b - 1.0)
            * s ** (b - 3.0)
        )
        np.testing.assert_allclose(np.exp(m.log_density(w)), direct, rtol=1e-10)


class TestPairwiseBeta:
    def test_constant_d3_gamma1(self):
        # K_3(1) = (2/(6 sqrt(3))) * Gamma(4) / (Gamma(3) Gamma(1)) = 1/sqrt(3)
        k = math.exp(log_pairwise_beta_constant(1.0, 3))
        np.testing.assert_allclose(k, 1.0 / math.sqrt(3.0), rtol=1e-12)

    def test_equal_parameters_permutation_invariant(self):
        m = PairwiseBetaModel(gamma=0.8, beta=(1.3, 1.3, 1.3), d=3)
        w = np.array([0.15, 0.35, 0.5])
        vals = [m.density(w[list(p)]) for p in [(0, 1, 2), (2, 1, 0), (1, 0, 2)]]
        np.testing.assert_allclose(vals, vals[0], rtol=1e-12)

    def test_flat_case_constant_density(self):
        # gamma = 1, all beta = 1: each pair term reduces to w_j + w_k, the sum
        # over pairs is (d-1), so h = K_3(1) * 2 = 2/sqrt(3) everywhere
        m = PairwiseBetaModel(gamma=1.0, beta=(1.0, 1.0, 1.0), d=3)
        rng = np.random.default_rng(4)
        w = rng.dirichlet([1, 1, 1], size=20)
        np.testing.assert_allclose(m.density(w), 2.0 / math.sqrt(3.0), rtol=1e-12)

    def test_mc_normalization_d4(self):
        rng = np.random.default_rng(7)
        beta = tuple(rng.uniform(0.4, 3.0, size=6))
        m = PairwiseBetaModel(gamma=0.37, beta=beta, d=4)
        mass, se = mc_normalization(m, n_mc=10**6, seed=11)
        assert abs(mass - 1.0) < 3.0 * se

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            PairwiseBetaModel(gamma=0.5, beta=(1.0,), d=2)
        with pytest.raises(ValueError):
            PairwiseBetaModel(gamma=-1.0, beta=(1.0, 1.0, 1.0), d=3)
        with pytest.raises(ValueError):
            PairwiseBetaModel(gamma=0.5, beta=(1.0, -2.0, 1.0), d=3)
        with pytest.raises(ValueError):
            PairwiseBetaModel(gamma=0.5, beta=(1.0, 1.0), d=3)

    def test_large_beta_no_overflow(self):
        # Table 2 scale parameters: log-space evaluation must stay finite
        m = PairwiseBetaModel(gamma=TABLE2_GAMMA, beta=TABLE2_BETA, d=5)
        rng = np.random.default_rng(2)
        w = rng.dirichlet(np.ones(5), size=100)
        ld = m.log_density(w)
        assert np.all(np.isfinite(ld))

    def test_sampler_matches_density_moments(self):
        # E[w] under H from the exact sampler vs importance-sampled moments
        m = PairwiseBetaModel(gamma=0.9, beta=(0.6, 2.0, 1.2), d=3)
        angles = m.sample_angles(200000, seed=3)
        emp = angles.mean(axis=0)
        est, se = moment_check(m, n_mc=400000, seed=5, return_se=True)
        np.testing.assert_allclose(emp, est, atol=4e-3)
        samp_se = angles.std(axis=0) / math.sqrt(angles.shape[0])
        assert np.all(np.abs(emp - est) < 4 * (se + samp_se) + 1e-4)


class TestMoments:
    def test_bivariate_logistic_moments_symmetry(self):
        est = moment_check(LogisticModel(beta=0.6, d=2), n_mc=200000, seed=9)
        np.testing.assert_allclose(est, [0.5, 0.5], atol=0.01)

    def test_trivariate_logistic_moments(self):
        est, se = moment_check(
            LogisticModel(beta=0.3, d=3), n_mc=10**6, seed=13, return_se=True
        )
        assert np.all(np.abs(est - 1.0 / 3.0) < 3 * se)

    def test_pairwise_beta_table2_moments(self):
        m = PairwiseBetaModel(gamma=TABLE2_GAMMA, beta=TABLE2_BETA, d=5)
        est, se = moment_check(m, n_mc=10**6, seed=17, return_se=True)
        assert np.all(np.abs(est - 0.2) < 3 * se)


class TestCartesianIntensity:
    def test_homogeneity(self):
        m = LogisticModel(beta=0.3, d=3)
        z = np.array([1.2, 3.4, 0.8])
        for s in (0.5, 2.0, 7.0):
            np.testing.assert_allclose(
                cartesian_intensity(s * z, m),
                s ** (-4.0) * cartesian_intensity(z, m),
                rtol=1e-12,
            )

    def test_ray_ratio(self):
        m = PairwiseBetaModel(gamma=0.7, beta=(1.0, 2.0, 0.5), d=3)
        z = np.array([2.0, 1.0, 3.0])
        ratio = cartesian_intensity(z, m) / cartesian_intensity(2.0 * z, m)
        np.testing.assert_allclose(ratio, 2.0 ** 4, rtol=1e-12)

    def test_bivariate_logistic_mixed_derivative(self):
        # independent oracle: the intensity equals the mixed second derivative
        # of (1/2)(z1^-1 + z2^-1 - (z1^(-1/b) + z2^(-1/b))^b), by central
        # finite differences at z = (3, 4)
        b = 0.3
        m = LogisticModel(beta=b, d=2)

        def limit_tail(z1, z2):
            return 0.5 * (1.0 / z1 + 1.0 / z2 - (z1 ** (-1 / b) + z2 ** (-1 / b)) ** b)

        z1, z2, h = 3.0, 4.0, 1e-4
        fd = (
            limit_tail(z1 + h, z2 + h)
            - limit_tail(z1 + h, z2 - h)
            - limit_tail(z1 - h, z2 + h)
            + limit_tail(z1 - h, z2 - h)
        ) / (4 * h * h)
        np.testing.assert_allclose(cartesian_intensity([z1, z2], m), fd, rtol=1e-6)

    def test_zero_rejected(self):
        with pytest.raises(ValueError):
            cartesian_intensity([0.0, 0.0], LogisticModel(beta=0.5, d=2))


class TestSerialization:
    def test_round_trip(self):
        for m in (
            LogisticModel(beta=0.42, d=3),
            PairwiseBetaModel(gamma=1.3, beta=(0.5, 1.5, 2.5), d=3),
        ):
            m2 = model_from_dict(m.to_dict())
            assert m2 == m

    def test_convenience_wrappers(self):
        w = [0.3, 0.3, 0.4]
        np.testing.assert_allclose(
            logistic_density(w, 0.4), LogisticModel(0.4, 3).density(w)
        )
        np.testing.assert_allclose(
            pairwise_beta_density(w, 0.8, [1.0, 2.0, 3.0]),
            PairwiseBetaModel(0.8, (1.0, 2.0, 3.0), 3).density(w),
        )
        # matrix form of the pairwise parameters
        mat = PairwiseBetaModel(0.8, (1.0, 2.0, 3.0), 3).beta_matrix()
        np.testing.assert_allclose(
            pairwise_beta_density(w, 0.8, mat),
            pairwise_beta_density(w, 0.8, [1.0, 2.0, 3.0]),
        )
