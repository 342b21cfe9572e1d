"""Pairwise test statistic and Monte Carlo error-rate machinery."""

import numpy as np
import pytest
from scipy import stats

from bnpreg import testing as bt
from bnpreg.basis import FourierBasis
from bnpreg.design import uniform_design
from bnpreg.errors import ConfigError
from bnpreg.funcspace import SeriesFunction, l2_distance
from bnpreg.inference import RegressionData
from bnpreg.priors import GaussianSplinePrior

FOURIER = FourierBasis()


def series(*coefs):
    return SeriesFunction(FOURIER, np.asarray(coefs, dtype=float))


def make_data(f, n, sigma, seed):
    rng = np.random.default_rng(seed)
    design = uniform_design(n, 1, seed + 1)
    return RegressionData.simulate(f, design, sigma, rng)


class TestStatistic:
    def test_identical_hypotheses_give_zero(self):
        f = series(0.5, -0.2)
        data = make_data(f, 30, 1.0, 0)
        assert bt.test_statistic_tn(data, f, f) == 0.0
        assert not bt.test_decision(data, f, f)

    def test_noiseless_truth_never_rejected(self):
        # with y = f0(x), the statistic collapses to a nonpositive quadratic
        f0 = series(0.2, 0.7)
        f1 = series(-0.1, 0.4, 0.3)
        for seed in range(5):
            design = uniform_design(40, 1, seed)
            data = RegressionData(design, f0(design.points), 1.0)
            assert bt.test_statistic_tn(data, f0, f1) <= 1e-12

    def test_noiseless_alternative_rejected_for_large_n(self):
        # solve (n/2) v >= (sqrt n /(8 sqrt 2)) ||d|| sqrt(n v): holds as soon
        # as sqrt(v) >= ||d||/(4 sqrt 2), so any n works once the empirical
        # norm is close to the integrated one; use n = 200
        f0 = series(0.0)
        f1 = series(0.0, 0.5)
        design = uniform_design(200, 1, 3)
        data = RegressionData(design, f1(design.points), 1.0)
        assert bt.test_statistic_tn(data, f0, f1) > 0.0

    def test_translation_invariance(self):
        f0 = series(0.1, 0.3)
        f1 = series(-0.4, 0.2, 0.6)
        data = make_data(f0, 50, 1.0, 7)
        shift = 2.75
        shifted = RegressionData(data.design, data.responses + shift, data.sigma)
        t_orig = bt.test_statistic_tn(data, f0, f1)
        t_shift = bt.test_statistic_tn(shifted, f0.shifted(shift), f1.shifted(shift))
        assert t_shift == pytest.approx(t_orig, abs=1e-10)


class TestTypeOneError:
    def test_nonincreasing_and_log_linear_decay(self):
        f0 = series(0.3)
        f1 = series(0.3, 0.26)
        cfg = bt.TestConfig(replications=10000, seed=5)
        ests = [bt.mc_type1_error(f0, f1, n, cfg) for n in (50, 100, 200, 400)]
        values = [e.estimate for e in ests]
        assert all(a >= b for a, b in zip(values, values[1:]))
        slope, _, _, pval, _ = stats.linregress([e.n for e in ests], np.log(values))
        assert slope < 0.0

    def test_precondition_gate(self):
        f0 = series(0.3)
        with pytest.raises(ConfigError):
            bt.mc_type1_error(f0, f0, 50, bt.TestConfig(replications=10))


class TestTypeTwoError:
    def test_nonincreasing_at_alternative(self):
        f0 = series(0.3)
        f1 = series(0.3, 0.26)
        cfg = bt.TestConfig(replications=10000, seed=6)
        ests = [bt.mc_type2_error(f1, f0, f1, n, cfg) for n in (50, 100, 200, 400)]
        values = [e.estimate for e in ests]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_boundary_alternative_admitted(self):
        f0 = series(0.0)
        f1 = series(0.0, 0.4)
        xi = bt.XI_DEFAULT
        gap = xi * l2_distance(f0, f1)
        f = series(0.0, 0.4, gap)  # exactly on the neighbourhood boundary
        est = bt.mc_type2_error(f, f0, f1, 100, bt.TestConfig(replications=200, seed=0))
        assert np.isfinite(est.estimate)

    def test_violating_neighbourhood_rejected(self):
        f0 = series(0.0)
        f1 = series(0.0, 0.4)
        gap = bt.XI_DEFAULT * l2_distance(f0, f1)
        f = series(0.0, 0.4, 1.01 * gap)
        with pytest.raises(ConfigError):
            bt.mc_type2_error(f, f0, f1, 100, bt.TestConfig(replications=10))


class TestPriorConcentration:
    def test_whole_space_has_full_mass(self):
        prior = GaussianSplinePrior(2, 2)
        f0 = SeriesFunction(prior.basis, np.zeros(prior.dim))
        cset = bt.ConcentrationSet(k=1, epsilon=1e6, omega=1e6, eta_prime=1.0)
        est = bt.prior_concentration_mc(prior, f0, cset, draws=500, seed=1)
        assert est.estimate == 1.0

    def test_scalar_normal_mass_matches_cdf(self):
        # m = 1 constant spline: membership is |beta| < eps exactly
        prior = GaussianSplinePrior(1, 1)
        f0 = SeriesFunction(prior.basis, np.zeros(1))
        eps = 0.5
        cset = bt.ConcentrationSet(k=1, epsilon=eps, omega=1e6, eta_prime=1.0)
        est = bt.prior_concentration_mc(prior, f0, cset, draws=100000, seed=2)
        target = 2.0 * stats.norm.cdf(eps) - 1.0
        assert abs(est.estimate - target) < 3.0 * est.std_error

    def test_monotone_in_epsilon(self):
        prior = GaussianSplinePrior(2, 3)
        f0 = SeriesFunction(prior.basis, np.zeros(prior.dim))
        values = []
        for eps in (2.0, 1.0, 0.5, 0.25):
            cset = bt.ConcentrationSet(k=2, epsilon=eps, omega=10.0, eta_prime=2.0)
            values.append(bt.prior_concentration_mc(prior, f0, cset, draws=4000, seed=3).estimate)
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_zero_hits_reports_upper_bound(self):
        prior = GaussianSplinePrior(1, 1)
        f0 = SeriesFunction(prior.basis, np.zeros(1))
        cset = bt.ConcentrationSet(k=1, epsilon=1e-9, omega=1e6, eta_prime=1.0)
        with pytest.warns(UserWarning):
            est = bt.prior_concentration_mc(prior, f0, cset, draws=200, seed=4)
        assert est.estimate == 0.0
        assert est.upper_bound == pytest.approx(3.0 / 200)

    def test_sup_mode(self):
        prior = GaussianSplinePrior(1, 1)
        f0 = SeriesFunction(prior.basis, np.zeros(1))
        cset = bt.ConcentrationSet(k=1, epsilon=0.5, omega=1.0, eta_prime=1.0)
        est = bt.prior_concentration_mc(prior, f0, cset, draws=20000, seed=5, mode="sup")
        target = 2.0 * stats.norm.cdf(0.5) - 1.0  # constant function: sup = |beta|
        assert abs(est.estimate - target) < 4.0 * est.std_error


class TestCsvEmission:
    def test_table_format(self, tmp_path):
        f0 = series(0.3)
        f1 = series(0.3, 0.26)
        cfg = bt.TestConfig(replications=500, seed=8)
        ests = [bt.mc_type1_error(f0, f1, n, cfg) for n in (50, 100)]
        path = tmp_path / "power.csv"
        bt.write_estimates_csv(ests, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "n,statistic,estimate,std_error,replications,seed"
        assert len(lines) == 3
        assert lines[1].startswith("50,type1,")
