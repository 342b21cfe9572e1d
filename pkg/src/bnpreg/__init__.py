"""Nonparametric Bayesian regression on [0,1]: series priors, posterior
samplers, testing machinery, and an empirical contraction-rate harness."""

from .basis import BSplineBasis, FourierBasis, HaarWaveletBasis, orthonormality_check
from .design import Design, discrepancy, equidistant_design, uniform_design
from .errors import (
    BnpregError,
    ConfigError,
    DomainError,
    NumericalError,
    SamplerError,
    UnsupportedBasisError,
)
from .funcspace import (
    AdditiveFunction,
    SeriesFunction,
    SieveSpec,
    SmoothnessBall,
    additive_l2_distance,
    ball_contains,
    ball_norm,
    empirical_l2,
    l2_distance,
    make_truth,
    sieve_condition_check,
    sup_norm,
)
from .harness import (
    ExperimentConfig,
    RateFit,
    RateTable,
    fit_rate_slope,
    load_config,
    run_contraction_study,
)
from .inference import (
    GaussianPosterior,
    GPPosterior,
    McmcConfig,
    PosteriorDraws,
    RegressionData,
    effective_sample_size,
    fit_block_gibbs,
    fit_gp,
    fit_random_series_rjmcmc,
    fit_sparse_additive,
    fit_spline_conjugate,
)
from .priors import (
    BlockPriorFourier,
    BlockPriorWavelet,
    FiniteRandomSeriesPrior,
    GaussianSplinePrior,
    SEGPPrior,
    SparseAdditivePrior,
    block_partition,
    center_component,
    log_prior_density,
    sample_prior,
    verify_block_conditions,
    wavelet_gj_density,
)
from .testing import (
    ConcentrationSet,
    TestConfig,
    mc_type1_error,
    mc_type2_error,
    prior_concentration_mc,
    test_statistic_tn,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
