"""Posterior computation: conjugate algebra, oracles, and sampler correctness.

Oracles used here are independent of the code paths they check:
dense grid quadrature for low-dimensional posteriors, closed-form
normal-normal updates, Gaussian marginal-likelihood enumeration, and
prior-preservation (Geweke-style) runs with the likelihood disabled.
"""

import math

import numpy as np
import pytest
from scipy import linalg

from bnpreg.basis import FourierBasis
from bnpreg.design import Design, uniform_design
from bnpreg.errors import ConfigError, DomainError
from bnpreg.funcspace import SeriesFunction, SmoothnessBall, make_truth
from bnpreg.inference import (
    McmcConfig,
    PosteriorDraws,
    RegressionData,
    effective_sample_size,
    fit_block_gibbs,
    fit_gp,
    fit_random_series_rjmcmc,
    fit_sparse_additive,
    fit_spline_conjugate,
    fit_spline_mh,
    series_model_posterior,
    series_model_posterior_exact,
)
from bnpreg.priors import (
    BlockPriorFourier,
    FiniteRandomSeriesPrior,
    GaussianSplinePrior,
    SEGPPrior,
    SparseAdditivePrior,
    fourier_block_density,
)


def batch_se(values, batches=20):
    """Standard error of the mean of a correlated trace via batch means."""
    values = np.asarray(values, dtype=float)
    usable = (values.size // batches) * batches
    means = values[:usable].reshape(batches, -1).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(batches))


class TestSplineConjugate:
    def test_no_data_returns_prior(self):
        prior = GaussianSplinePrior(3, 4)
        post = fit_spline_conjugate(RegressionData.empty(1.0), prior)
        np.testing.assert_array_equal(post.mean, np.zeros(prior.dim))
        np.testing.assert_array_equal(post.covariance, np.eye(prior.dim))

    def test_scalar_normal_normal_update(self):
        prior = GaussianSplinePrior(1, 1)  # single constant basis function
        design = Design(np.array([0.3]), "random-uniform", 0)
        post = fit_spline_conjugate(RegressionData(design, np.array([2.0]), 1.0), prior)
        assert post.mean[0] == pytest.approx(1.0, abs=1e-12)
        assert post.covariance[0, 0] == pytest.approx(0.5, abs=1e-12)

    def test_matches_dense_grid_quadrature(self):
        # oracle: normalized posterior on a dense 2-d coefficient grid
        prior = GaussianSplinePrior(1, 2)  # m = 2 indicator functions
        rng = np.random.default_rng(0)
        design = uniform_design(40, 1, 3)
        truth_vals = 0.8 * (design.points < 0.5) - 0.3 * (design.points >= 0.5)
        data = RegressionData(design, truth_vals + rng.standard_normal(40), 1.0)
        post = fit_spline_conjugate(data, prior)

        grid = np.linspace(-2.5, 2.5, 701)
        b1, b2 = np.meshgrid(grid, grid, indexing="ij")
        bmat = prior.basis.design_matrix(design.points, 2)
        resid_sq = np.zeros_like(b1)
        for i in range(design.n):
            resid_sq += (data.responses[i] - bmat[i, 0] * b1 - bmat[i, 1] * b2) ** 2
        logpost = -0.5 * resid_sq - 0.5 * (b1**2 + b2**2)
        w = np.exp(logpost - logpost.max())
        w /= w.sum()
        mean1 = float((w * b1).sum())
        mean2 = float((w * b2).sum())
        sd1 = math.sqrt(float((w * (b1 - mean1) ** 2).sum()))
        sd2 = math.sqrt(float((w * (b2 - mean2) ** 2).sum()))
        assert post.mean[0] == pytest.approx(mean1, abs=1e-3)
        assert post.mean[1] == pytest.approx(mean2, abs=1e-3)
        np.testing.assert_allclose(post.marginal_sd(), [sd1, sd2], atol=1e-3)

    def test_warns_when_overparameterized(self):
        prior = GaussianSplinePrior(3, 6)
        design = uniform_design(4, 1, 0)
        data = RegressionData(design, np.zeros(4), 1.0)
        with pytest.warns(UserWarning):
            fit_spline_conjugate(data, prior)

    def test_agrees_with_random_walk_sampler(self):
        prior = GaussianSplinePrior(2, 3)
        rng = np.random.default_rng(5)
        design = uniform_design(60, 1, 8)
        truth = SeriesFunction(prior.basis, rng.standard_normal(prior.dim))
        data = RegressionData.simulate(truth, design, 0.7, rng)
        post = fit_spline_conjugate(data, prior)
        draws = fit_spline_mh(data, prior, McmcConfig(6000, 1000, seed=2))
        mat = np.array([c for c in draws.coefficients])
        for k in range(prior.dim):
            se = batch_se(mat[:, k])
            assert abs(mat[:, k].mean() - post.mean[k]) < 3.0 * se + 1e-4

    def test_mh_cross_checker_preserves_prior(self):
        prior = GaussianSplinePrior(2, 2)
        draws = fit_spline_mh(RegressionData.empty(1.0), prior, McmcConfig(8000, 1000, seed=3))
        mat = np.array([c for c in draws.coefficients])
        for k in range(prior.dim):
            se = batch_se(mat[:, k])
            assert abs(mat[:, k].mean()) < 4.0 * se
            se_sq = batch_se(mat[:, k] ** 2)
            assert abs((mat[:, k] ** 2).mean() - 1.0) < 4.0 * se_sq


class TestGaussianProcess:
    def test_no_data_returns_prior_marginals(self):
        grid = np.linspace(0, 1, 33)
        post = fit_gp(RegressionData.empty(1.0), SEGPPrior(), grid)
        np.testing.assert_array_equal(post.mean, np.zeros(33))
        np.testing.assert_allclose(post.pointwise_variance, 1.0, atol=1e-12)

    def test_near_interpolation_with_tiny_noise(self):
        design = Design(np.array([0.5]), "random-uniform", 0)
        data = RegressionData(design, np.array([1.0]), 1e-6)
        post = fit_gp(data, SEGPPrior(), np.array([0.5]))
        assert post.mean[0] == pytest.approx(1.0, abs=1e-4)

    def test_variance_never_exceeds_prior(self):
        rng = np.random.default_rng(2)
        design = uniform_design(25, 1, 4)
        data = RegressionData(design, rng.standard_normal(25), 0.5)
        grid = np.linspace(0, 1, 101)
        post = fit_gp(data, SEGPPrior(), grid)
        assert np.all(post.pointwise_variance <= 1.0 + 1e-10)

    def test_matches_direct_solve(self):
        # oracle: explicit matrix inversion instead of Cholesky solves
        rng = np.random.default_rng(9)
        design = uniform_design(30, 1, 5)
        data = RegressionData(design, np.sin(6 * design.points) + 0.1 * rng.standard_normal(30), 0.3)
        grid = np.linspace(0, 1, 17)
        post = fit_gp(data, SEGPPrior(), grid)
        kxx = SEGPPrior.kernel(design.points, design.points) + (0.09 + 1e-10) * np.eye(30)
        kxg = SEGPPrior.kernel(design.points, grid)
        inv = np.linalg.inv(kxx)
        np.testing.assert_allclose(post.mean, kxg.T @ inv @ data.responses, atol=1e-8)
        cov = SEGPPrior.kernel(grid, grid) - kxg.T @ inv @ kxg
        np.testing.assert_allclose(post.covariance, cov, atol=1e-8)


class TestBlockGibbs:
    def test_variance_draws_stay_in_support(self):
        prior = BlockPriorFourier(3)
        rng = np.random.default_rng(1)
        truth = make_truth(SmoothnessBall("sobolev", 1.0, 1.0), 3, 60)
        data = RegressionData.simulate(truth, uniform_design(120, 1, 2), 1.0, rng)
        draws = fit_block_gibbs(data, prior, McmcConfig(500, 100, seed=4), reference=truth)
        variances = draws.extras["variances"]
        for level in range(4):
            assert variances[:, level].max() <= math.exp(-level) + 1e-15
            assert variances[:, level].min() >= 0.0

    def test_shrinkage_grows_with_data(self):
        # zero truth: more data shrinks the posterior norm
        prior = BlockPriorFourier(2)
        zero = SeriesFunction(FourierBasis(), np.zeros(1))
        norms = {}
        for n in (100, 2000):
            rng = np.random.default_rng(7)
            data = RegressionData.simulate(zero, uniform_design(n, 1, 11), 1.0, rng)
            draws = fit_block_gibbs(data, prior, McmcConfig(800, 200, seed=5), reference=zero)
            norms[n] = float(np.mean(draws.l2_errors(zero)))
        assert norms[2000] < norms[100]

    def test_single_block_matches_grid_oracle(self):
        # brute force over (beta_1, beta_2, variance) on a dense 3-d grid
        prior = BlockPriorFourier(0)  # one block of size 2
        rng = np.random.default_rng(3)
        design = uniform_design(12, 1, 6)
        truth = SeriesFunction(FourierBasis(), np.array([0.4, -0.3]))
        data = RegressionData.simulate(truth, design, 1.0, rng)
        psi = FourierBasis().design_matrix(design.points, 2)

        dens = fourier_block_density(0)
        a_grid = np.linspace(1e-4, dens.support, 220)
        b_grid = np.linspace(-1.6, 1.6, 110)
        b1, b2, aa = np.meshgrid(b_grid, b_grid, a_grid, indexing="ij")
        resid_sq = np.zeros_like(b1)
        for i in range(design.n):
            resid_sq += (data.responses[i] - psi[i, 0] * b1 - psi[i, 1] * b2) ** 2
        log_post = (
            -0.5 * resid_sq
            - 0.5 * (b1**2 + b2**2) / aa
            - np.log(aa)
            + np.log(dens.pdf(aa))
        )
        w = np.exp(log_post - log_post.max())
        w /= w.sum()
        oracle_mean = np.array([(w * b1).sum(), (w * b2).sum()])

        draws = fit_block_gibbs(data, prior, McmcConfig(6000, 1000, seed=8), reference=truth)
        mat = np.array(draws.coefficients)
        for k in range(2):
            se = batch_se(mat[:, k])
            assert abs(mat[:, k].mean() - oracle_mean[k]) < 3.0 * se + 2e-3

    def test_prior_preservation_without_data(self):
        # Geweke-style: no observations, the chain must reproduce the prior
        prior = BlockPriorFourier(2)
        draws = fit_block_gibbs(RegressionData.empty(1.0), prior, McmcConfig(4000, 500, seed=10))
        variances = draws.extras["variances"]
        mat = np.array(draws.coefficients)
        for level in range(3):
            dens = prior.variance_density(level)
            se = batch_se(variances[:, level])
            assert abs(variances[:, level].mean() - dens.mean()) < 4.0 * se
            block = mat[:, prior.level_slice(level)]
            se_mean = batch_se(block.mean(axis=1))
            assert abs(block.mean()) < 4.0 * se_mean
            # within-block second moment equals the mean block variance
            se_var = batch_se((block**2).mean(axis=1))
            assert abs((block**2).mean() - dens.mean()) < 4.0 * se_var


class TestRandomSeriesRJ:
    def test_model_posterior_matches_enumeration(self):
        prior = FiniteRandomSeriesPrior(1.0, 2.0, 0.5)
        rng = np.random.default_rng(1)
        truth = make_truth(SmoothnessBall("holder", 1.0, 2.0), 7, 100)
        data = RegressionData.simulate(truth, uniform_design(50, 1, 21), 1.0, rng)
        draws = fit_random_series_rjmcmc(data, prior, McmcConfig(60000, 5000, seed=4), reference=truth)
        emp = series_model_posterior(draws, 10)
        exact = series_model_posterior_exact(data, prior, 10)
        tv = 0.5 * float(np.abs(emp - exact).sum()) + 0.5 * max(0.0, 1.0 - float(emp.sum()))
        assert tv < 0.05

    def test_zero_post_burn_in_is_config_error(self):
        with pytest.raises(ConfigError):
            McmcConfig(iterations=100, burn_in=100)

    def test_within_move_acceptance_in_band(self):
        prior = FiniteRandomSeriesPrior()
        rng = np.random.default_rng(2)
        truth = make_truth(SmoothnessBall("holder", 1.0, 2.0), 3, 100)
        data = RegressionData.simulate(truth, uniform_design(200, 1, 5), 1.0, rng)
        draws = fit_random_series_rjmcmc(data, prior, McmcConfig(5000, 2000, seed=6), reference=truth)
        assert 0.1 < draws.acceptance["within"] < 0.6

    def test_prior_preservation_without_data(self):
        prior = FiniteRandomSeriesPrior(1.0, 2.0, 0.5)
        draws = fit_random_series_rjmcmc(
            RegressionData.empty(1.0), prior, McmcConfig(30000, 2000, seed=3)
        )
        trace = draws.extras["n_trace"]
        mean_terms = math.e / (math.e - 1.0)  # zero-truncated Poisson(1) mean
        se = batch_se(trace.astype(float))
        assert abs(trace.mean() - mean_terms) < 4.0 * se
        pooled = np.concatenate([c for c in draws.coefficients])
        se_sq = batch_se(np.array([float(np.mean(c**2)) for c in draws.coefficients]))
        assert abs(float(np.mean(pooled**2)) - 1.0) < 5.0 * se_sq

    def test_deterministic_given_seed(self):
        prior = FiniteRandomSeriesPrior()
        rng = np.random.default_rng(4)
        truth = make_truth(SmoothnessBall("holder", 1.0, 2.0), 3, 50)
        data = RegressionData.simulate(truth, uniform_design(40, 1, 9), 1.0, rng)
        a = fit_random_series_rjmcmc(data, prior, McmcConfig(500, 100, seed=11))
        b = fit_random_series_rjmcmc(data, prior, McmcConfig(500, 100, seed=11))
        assert all(np.array_equal(x, y) for x, y in zip(a.coefficients, b.coefficients))


class TestSparseAdditive:
    def test_recovers_active_coordinate(self):
        prior = SparseAdditivePrior(2, FiniteRandomSeriesPrior(1.0, 2.0, 0.5))
        ball = SmoothnessBall("holder", 1.0, 2.0)
        comp = make_truth(ball, 5, 30, zero_mean=True)
        from bnpreg.funcspace import AdditiveFunction

        truth = AdditiveFunction(0.3, (comp, comp), np.array([True, False]))
        rng = np.random.default_rng(6)
        data = RegressionData.simulate(truth, uniform_design(500, 2, 12), 0.5, rng)
        draws = fit_sparse_additive(data, prior, McmcConfig(4000, 1000, seed=7), reference=truth)
        incl = draws.inclusion_probabilities()
        assert incl[0] > 0.9
        assert incl[1] < 0.5

    def test_all_inactive_reduces_to_scalar_update(self):
        # flips disabled, nothing active: posterior of the mean is the
        # closed-form normal-normal update
        prior = SparseAdditivePrior(3)
        rng = np.random.default_rng(8)
        design = uniform_design(80, 3, 10)
        y = 0.7 + 0.9 * rng.standard_normal(80)
        data = RegressionData(design, y, 0.9)
        draws = fit_sparse_additive(
            data,
            prior,
            McmcConfig(12000, 2000, seed=9),
            allow_flips=False,
            init_active=np.zeros(3, dtype=bool),
        )
        assert not draws.zs.any()
        prec = 1.0 + data.n / data.sigma**2
        oracle_mean = (y.sum() / data.sigma**2) / prec
        se = batch_se(draws.mus)
        assert abs(draws.mus.mean() - oracle_mean) < 3.0 * se + 1e-3
        assert np.std(draws.mus) == pytest.approx(1.0 / math.sqrt(prec), rel=0.15)

    def test_prior_preservation_without_data(self):
        prior = SparseAdditivePrior(4)
        draws = fit_sparse_additive(
            RegressionData.empty(1.0), prior, McmcConfig(20000, 2000, seed=10)
        )
        incl = draws.inclusion_probabilities()
        se = np.array([batch_se(draws.zs[:, j].astype(float)) for j in range(4)])
        assert np.all(np.abs(incl - 0.25) < 4.0 * se)
        se_mu = batch_se(draws.mus)
        assert abs(draws.mus.mean()) < 4.0 * se_mu

    def test_rejects_mismatched_design_dimension(self):
        prior = SparseAdditivePrior(3)
        data = RegressionData(uniform_design(10, 2, 0), np.zeros(10), 1.0)
        with pytest.raises(DomainError):
            fit_sparse_additive(data, prior, McmcConfig(10, 1, seed=0))


class TestDiagnostics:
    def test_ess_of_iid_sequence_near_length(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(4000)
        assert effective_sample_size(x) > 2500

    def test_ess_of_sticky_chain_is_small(self):
        rng = np.random.default_rng(1)
        x = np.zeros(4000)
        for i in range(1, 4000):
            x[i] = 0.99 * x[i - 1] + math.sqrt(1 - 0.99**2) * rng.standard_normal()
        assert effective_sample_size(x) < 400

    def test_draws_serialization_round_trip(self, tmp_path):
        prior = GaussianSplinePrior(2, 2)
        rng = np.random.default_rng(2)
        post = fit_spline_conjugate(RegressionData.empty(1.0), prior)
        draws = PosteriorDraws(
            basis=prior.basis,
            coefficients=list(post.sample(rng, 5)),
            acceptance={},
            ess=5.0,
            seed=0,
        )
        path = tmp_path / "draws.jsonl"
        draws.to_jsonl(path)
        lines = path.read_text().strip().splitlines()
        assert len(lines) == 5
        loaded = SeriesFunction.from_json(lines[0])
        np.testing.assert_allclose(loaded.coefficients, draws.coefficients[0], atol=1e-15)
