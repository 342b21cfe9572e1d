"""Executable testing theory: the pairwise test statistic, Monte Carlo
error-rate estimation, and prior-concentration probing.

The statistic compares two candidate regression functions f0 and f1 on a
dataset.  It is the log likelihood ratio penalized by an empirical-norm
margin; the associated test rejects f0 when the statistic is positive.
Error rates are estimated by vectorized Monte Carlo over fresh
random-uniform designs.
"""

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError
from .funcspace import (
    SeriesFunction,
    l2_distance,
    sup_distance,
)
from .inference import RegressionData

XI_DEFAULT = 1.0 / (4.0 * math.sqrt(2.0))

PENALTY_FACTOR = 1.0 / (8.0 * math.sqrt(2.0))


@dataclass(frozen=True)
class TestConfig:
    """Separation constant, replication count, and seed for error-rate runs."""

    xi: float = XI_DEFAULT
    replications: int = 10000
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.xi < 1.0:
            raise ConfigError("xi must lie in (0, 1)")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")


@dataclass(frozen=True)
class ConcentrationSet:
    """Neighbourhood of f0: L2 distance below epsilon and a sup-norm growth cap.

    Membership: ||f - f0||_2 < epsilon and
    sup|f - f0|^2 <= eta_prime * (k ||f - f0||_2^2 + omega^2).
    """

    k: int
    epsilon: float
    omega: float
    eta_prime: float

    def __post_init__(self):
        if self.k < 1 or self.epsilon <= 0 or self.omega < 0 or self.eta_prime <= 0:
            raise DomainError("need k >= 1, epsilon > 0, omega >= 0, eta_prime > 0")

    def contains(self, f: SeriesFunction, f0: SeriesFunction) -> bool:
        l2 = l2_distance(f, f0)
        if l2 >= self.epsilon:
            return False
        sup = sup_distance(f, f0)
        return sup**2 <= self.eta_prime * (self.k * l2**2 + self.omega**2)


def test_statistic_tn(data: RegressionData, f0: SeriesFunction, f1: SeriesFunction) -> float:
    """Penalized likelihood-ratio statistic for f1 against f0.

    T = sum_i y_i (f1 - f0)(x_i) - (1/2) sum_i (f1^2 - f0^2)(x_i)
        - (sqrt(n)/(8 sqrt 2)) ||f1 - f0||_2 sqrt(sum_i (f1 - f0)(x_i)^2);
    the test rejects f0 iff T > 0.
    """
    if data.n == 0:
        raise DomainError("the test statistic needs a nonempty design")
    x = data.design.points
    v0 = f0(x)
    v1 = f1(x)
    diff = v1 - v0
    loglik_term = float(data.responses @ diff) - 0.5 * float(np.sum(v1**2 - v0**2))
    penalty = (
        math.sqrt(data.n)
        * PENALTY_FACTOR
        * l2_distance(f1, f0)
        * math.sqrt(float(np.sum(diff**2)))
    )
    return loglik_term - penalty


def test_decision(data: RegressionData, f0: SeriesFunction, f1: SeriesFunction) -> bool:
    return test_statistic_tn(data, f0, f1) > 0.0


@dataclass(frozen=True)
class MonteCarloEstimate:
    """A proportion estimate with its binomial standard error."""

    statistic: str
    n: int
    estimate: float
    std_error: float
    replications: int
    seed: int
    upper_bound: float | None = None

    def as_row(self) -> dict:
        return {
            "n": self.n,
            "statistic": self.statistic,
            "estimate": self.estimate,
            "std_error": self.std_error,
            "replications": self.replications,
            "seed": self.seed,
        }


def _batched_statistics(
    truth_values_fn,
    f0: SeriesFunction,
    f1: SeriesFunction,
    n: int,
    sigma: float,
    config: TestConfig,
) -> np.ndarray:
    """Vectorized T over ``replications`` datasets with fresh uniform designs."""
    rng = np.random.default_rng(config.seed)
    reps = config.replications
    x = rng.uniform(size=(reps, n))
    flat = x.ravel()
    v0 = f0(flat).reshape(reps, n)
    v1 = f1(flat).reshape(reps, n)
    signal = truth_values_fn(flat).reshape(reps, n)
    y = signal + sigma * rng.standard_normal((reps, n))
    diff = v1 - v0
    loglik = np.sum(y * diff, axis=1) - 0.5 * np.sum(v1**2 - v0**2, axis=1)
    penalty = (
        math.sqrt(n)
        * PENALTY_FACTOR
        * l2_distance(f1, f0)
        * np.sqrt(np.sum(diff**2, axis=1))
    )
    return loglik - penalty


def _proportion(name: str, n: int, hits: np.ndarray, config: TestConfig) -> MonteCarloEstimate:
    est = float(np.mean(hits))
    se = math.sqrt(est * (1.0 - est) / hits.size)
    upper = None
    if est == 0.0:
        upper = 3.0 / hits.size  # one-sided 95% bound when nothing is observed
        warnings.warn(f"{name} estimate is exactly zero; reporting upper bound {upper:.2e}")
    return MonteCarloEstimate(name, n, est, se, hits.size, config.seed, upper)


def mc_type1_error(
    f0: SeriesFunction,
    f1: SeriesFunction,
    n: int,
    config: TestConfig,
    sigma: float = 1.0,
) -> MonteCarloEstimate:
    """Fraction of datasets drawn under f0 on which the test rejects f0.

    Requires the separation sqrt(n) ||f1 - f0||_2 > 1.
    """
    sep = math.sqrt(n) * l2_distance(f1, f0)
    if sep <= 1.0:
        raise ConfigError(
            f"type I estimation requires sqrt(n) * ||f1 - f0||_2 > 1, got {sep:.4f}"
        )
    stats = _batched_statistics(f0, f0, f1, n, sigma, config)
    return _proportion("type1", n, stats > 0.0, config)


def mc_type2_error(
    f: SeriesFunction,
    f0: SeriesFunction,
    f1: SeriesFunction,
    n: int,
    config: TestConfig,
    sigma: float = 1.0,
) -> MonteCarloEstimate:
    """Fraction of datasets drawn under f on which the test keeps f0.

    ``f`` must lie in the xi-neighbourhood of f1:
    ||f - f1||_2 <= xi ||f0 - f1||_2.
    """
    gap = l2_distance(f, f1)
    allowed = config.xi * l2_distance(f0, f1)
    if gap > allowed * (1.0 + 1e-12):
        raise ConfigError(
            f"alternative lies outside the test neighbourhood: "
            f"||f - f1|| = {gap:.4f} > xi ||f0 - f1|| = {allowed:.4f}"
        )
    stats = _batched_statistics(f, f0, f1, n, sigma, config)
    return _proportion("type2", n, stats <= 0.0, config)


def prior_concentration_mc(
    prior,
    f0: SeriesFunction,
    cset: ConcentrationSet,
    draws: int,
    seed: int = 0,
    mode: str = "l2",
) -> MonteCarloEstimate:
    """Monte Carlo prior mass of the concentration set around f0.

    ``mode="sup"`` swaps the membership test for the plain sup-norm ball
    sup|f - f0| < epsilon.
    """
    if draws < 1:
        raise DomainError("draws must be >= 1")
    if mode not in ("l2", "sup"):
        raise DomainError(f"unknown concentration mode {mode!r}")
    root = np.random.SeedSequence(seed)
    hits = np.empty(draws, dtype=bool)
    for i, child in enumerate(root.spawn(draws)):
        draw = sample_prior_child(prior, child)
        if mode == "l2":
            hits[i] = cset.contains(draw, f0)
        else:
            hits[i] = sup_distance(draw, f0) < cset.epsilon
    config = TestConfig(replications=draws, seed=seed)
    return _proportion("concentration", draws, hits, config)


def sample_prior_child(prior, seed_seq: np.random.SeedSequence):
    """Prior draw from a spawned seed sequence (keeps replication streams independent)."""
    from .priors import SEGPPrior

    if isinstance(prior, SEGPPrior):
        raise DomainError("concentration probing over a GP draw needs a series prior")
    rng = np.random.default_rng(seed_seq)
    return prior.sample(rng)


def write_estimates_csv(estimates, path) -> None:
    """Emit (n, statistic, estimate, std_error, replications, seed) rows."""
    fieldnames = ["n", "statistic", "estimate", "std_error", "replications", "seed"]
    with open(path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=fieldnames)
        writer.writeheader()
        for est in estimates:
            writer.writerow(est.as_row())
