"""Posterior computation per prior family.

Conjugate closed forms where they exist (Gaussian spline coefficients,
squared-exponential GP), Markov chain Monte Carlo otherwise:

* blocked Gibbs for the block priors -- joint Gaussian solve for the
  coefficients given the block variances, slice sampling on log-variance
  for each block given its coefficients;
* reversible-jump Metropolis for the finite random series prior, with
  birth proposals drawn from the coefficient prior so the acceptance
  ratio reduces to likelihood times model-prior mass;
* Metropolis-within-Gibbs for the sparse additive model (inclusion
  flips with birth-from-prior component proposals, random-walk mean
  updates, and the random-series moves on active components).

A fit call is sequential; run many fits concurrently by giving each an
independently seeded configuration.
"""

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .basis import FourierBasis, midpoint_grid
from .design import Design
from .errors import ConfigError, DomainError, NumericalError, SamplerError
from .funcspace import SeriesFunction, AdditiveFunction, _padded_pair
from .priors import (
    BlockPriorFourier,
    BlockPriorWavelet,
    FiniteRandomSeriesPrior,
    GaussianSplinePrior,
    SEGPPrior,
    SparseAdditivePrior,
    center_component,
)

DEFAULT_ERROR_GRID = 2048


# ---------------------------------------------------------------------------
# data and configuration containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegressionData:
    """Observed design, responses, and the known noise standard deviation."""

    design: Design | None
    responses: np.ndarray
    sigma: float

    def __post_init__(self):
        y = np.atleast_1d(np.asarray(self.responses, dtype=float))
        if self.sigma <= 0:
            raise DomainError("sigma must be positive")
        n = 0 if self.design is None else self.design.n
        if y.size != n:
            raise DomainError(f"{y.size} responses for {n} design points")
        if y.size and not np.all(np.isfinite(y)):
            raise DomainError("responses must be finite")
        object.__setattr__(self, "responses", y)

    @property
    def n(self) -> int:
        return 0 if self.design is None else self.design.n

    @staticmethod
    def empty(sigma: float) -> "RegressionData":
        """A dataset with no observations; fits then reproduce the prior."""
        return RegressionData(None, np.empty(0), sigma)

    @staticmethod
    def simulate(f, design: Design, sigma: float, rng: np.random.Generator) -> "RegressionData":
        """y_i = f(x_i) + sigma * N(0,1), with sigma = 0 allowed for noiseless
        responses (the stored likelihood sigma is floored at 1e-8)."""
        signal = np.atleast_1d(f(design.points))
        noise = rng.standard_normal(design.n) * sigma if sigma > 0 else 0.0
        return RegressionData(design, signal + noise, max(sigma, 1e-8))


@dataclass(frozen=True)
class McmcConfig:
    """Chain length, thinning, seeding, and move mixture for the samplers."""

    iterations: int
    burn_in: int
    thin: int = 1
    seed: int = 0
    proposal_scale: float = 0.5
    mu_proposal_scale: float = 0.5
    move_probs: tuple = (0.25, 0.25, 0.5)
    adapt: bool = True

    def __post_init__(self):
        if self.burn_in < 0 or self.iterations <= self.burn_in:
            raise ConfigError("need iterations > burn_in >= 0 (no draws would remain)")
        if self.thin < 1:
            raise ConfigError("thin must be >= 1")
        probs = tuple(float(p) for p in self.move_probs)
        if len(probs) != 3 or any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-9:
            raise ConfigError("move_probs must be three nonnegative numbers summing to 1")
        if self.proposal_scale <= 0 or self.mu_proposal_scale <= 0:
            raise ConfigError("proposal scales must be positive")
        object.__setattr__(self, "move_probs", probs)


def effective_sample_size(trace) -> float:
    """ESS via the initial-positive-sequence autocorrelation estimator."""
    x = np.asarray(trace, dtype=float)
    n = x.size
    if n < 4 or np.ptp(x) == 0.0:
        return float(n)
    xc = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n].real / n
    rho = acov / acov[0]
    total = 0.0
    t = 1
    while t + 1 < n:
        pair = rho[t] + rho[t + 1]
        if pair <= 0.0:
            break
        total += pair
        t += 2
    ess = n / (1.0 + 2.0 * total)
    return float(min(max(ess, 1.0), n))


# ---------------------------------------------------------------------------
# posterior containers
# ---------------------------------------------------------------------------

@dataclass
class GaussianPosterior:
    """Multivariate normal posterior over basis coefficients."""

    basis: object
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.asarray(self.covariance, dtype=float)
        if np.max(np.abs(cov - cov.T)) > 1e-12 * max(1.0, np.max(np.abs(cov))):
            raise NumericalError("posterior covariance is not symmetric")
        cov = 0.5 * (cov + cov.T)
        try:
            self._chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                f"covariance not positive definite (cond ~ {np.linalg.cond(cov):.3e})"
            ) from exc
        self.covariance = cov

    @property
    def dim(self) -> int:
        return self.mean.size

    def marginal_sd(self) -> np.ndarray:
        return np.sqrt(np.diag(self.covariance))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        z = rng.standard_normal((size, self.dim))
        return self.mean[None, :] + z @ self._chol.T

    def sample_functions(self, rng: np.random.Generator, size: int) -> list[SeriesFunction]:
        return [SeriesFunction(self.basis, row) for row in self.sample(rng, size)]

    def sample_errors(
        self,
        rng: np.random.Generator,
        size: int,
        reference: SeriesFunction,
        grid_points: int = DEFAULT_ERROR_GRID,
    ) -> np.ndarray:
        """L2 errors of Monte Carlo posterior draws against a reference."""
        coefs = list(self.sample(rng, size))
        return _draw_errors(self.basis, coefs, reference, grid_points)


@dataclass
class GPPosterior:
    """GP regression posterior restricted to a query grid."""

    grid: np.ndarray
    mean: np.ndarray
    covariance: np.ndarray

    @property
    def pointwise_variance(self) -> np.ndarray:
        return np.clip(np.diag(self.covariance), 0.0, None)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        cov = 0.5 * (self.covariance + self.covariance.T)
        cov = cov + 1e-10 * np.eye(cov.shape[0])
        chol = np.linalg.cholesky(cov)
        z = rng.standard_normal((size, self.grid.size))
        return self.mean[None, :] + z @ chol.T


def _draw_errors(basis, coefficient_list, reference: SeriesFunction, grid_points: int = DEFAULT_ERROR_GRID) -> np.ndarray:
    """Integrated L2 error of each draw against a reference function."""
    same_family = type(basis) is type(reference.basis) and basis == reference.basis
    if same_family and basis.name in ("fourier", "haar"):
        width = max(max((c.size for c in coefficient_list), default=1), reference.coefficients.size)
        ref = np.zeros(width)
        ref[: reference.coefficients.size] = reference.coefficients
        out = np.empty(len(coefficient_list))
        for i, c in enumerate(coefficient_list):
            diff = -ref.copy()
            diff[: c.size] += c
            out[i] = np.sqrt(np.sum(diff * diff))
        return out
    grid = midpoint_grid(grid_points)
    ref_vals = reference(grid)
    width = max((c.size for c in coefficient_list), default=1)
    design = basis.design_matrix(grid, width)
    mat = np.zeros((len(coefficient_list), width))
    for i, c in enumerate(coefficient_list):
        mat[i, : c.size] = c
    diffs = mat @ design.T - ref_vals[None, :]
    return np.sqrt(np.mean(diffs * diffs, axis=1))


@dataclass
class PosteriorDraws:
    """Ordered post-burn-in draws plus sampler diagnostics."""

    basis: object
    coefficients: list
    acceptance: dict
    ess: float
    seed: int
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.coefficients:
            raise ConfigError("a sampler returned no draws after burn-in")

    def __len__(self) -> int:
        return len(self.coefficients)

    def functions(self) -> list[SeriesFunction]:
        return [SeriesFunction(self.basis, c) for c in self.coefficients]

    def l2_errors(self, reference: SeriesFunction) -> np.ndarray:
        return _draw_errors(self.basis, self.coefficients, reference)

    def to_jsonl(self, path) -> None:
        with open(path, "w") as handle:
            for fn in self.functions():
                handle.write(fn.to_json() + "\n")


# ---------------------------------------------------------------------------
# conjugate fits
# ---------------------------------------------------------------------------

def fit_spline_conjugate(data: RegressionData, prior: GaussianSplinePrior) -> GaussianPosterior:
    """Exact posterior for i.i.d. N(0,1) spline coefficients.

    Posterior precision I + B'B/sigma^2 and mean (precision)^{-1} B'y/sigma^2
    for the n x m spline design matrix B.
    """
    m = prior.dim
    basis = prior.basis
    if data.n == 0:
        return GaussianPosterior(basis, np.zeros(m), np.eye(m))
    if m > data.n:
        warnings.warn(f"spline dimension {m} exceeds sample size {data.n}", stacklevel=2)
    bmat = basis.design_matrix(data.design.points, m)
    precision = np.eye(m) + bmat.T @ bmat / data.sigma**2
    try:
        cho = linalg.cho_factor(precision, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError(
            f"spline precision factorization failed (cond ~ {np.linalg.cond(precision):.3e})"
        ) from exc
    covariance = linalg.cho_solve(cho, np.eye(m))
    mean = linalg.cho_solve(cho, bmat.T @ data.responses / data.sigma**2)
    return GaussianPosterior(basis, mean, covariance)


def fit_gp(data: RegressionData, prior: SEGPPrior, query_grid) -> GPPosterior:
    """Standard GP regression conditional on a query grid.

    mean = K*' (K + sigma^2 I)^{-1} y and
    cov = K** - K*' (K + sigma^2 I)^{-1} K*, with an escalating jitter
    ladder if the kernel matrix resists factorization.
    """
    grid = np.atleast_1d(np.asarray(query_grid, dtype=float))
    k_gg = prior.kernel(grid, grid)
    if data.n == 0:
        return GPPosterior(grid, np.zeros(grid.size), k_gg)
    if data.design.p != 1:
        raise DomainError("GP regression here is defined for one-dimensional designs")
    x = data.design.points
    k_xx = prior.kernel(x, x)
    k_xg = prior.kernel(x, grid)
    cho = None
    for jitter in (prior.jitter, 1e-8, 1e-6):
        try:
            cho = linalg.cho_factor(
                k_xx + (data.sigma**2 + jitter) * np.eye(data.n), lower=True
            )
            break
        except linalg.LinAlgError:
            continue
    if cho is None:
        raise NumericalError("GP kernel matrix not factorizable after jitter escalation")
    alpha = linalg.cho_solve(cho, data.responses)
    solve_xg = linalg.cho_solve(cho, k_xg)
    mean = k_xg.T @ alpha
    cov = k_gg - k_xg.T @ solve_xg
    return GPPosterior(grid, mean, cov)


# ---------------------------------------------------------------------------
# blocked Gibbs for the block priors
# ---------------------------------------------------------------------------

def _slice_variance_update(
    dens,
    block_size: int,
    sum_sq: float,
    current: float,
    rng: np.random.Generator,
    max_evals: int = 500,
) -> float:
    """Slice sample t from p(t) prop g(t) t^(-b/2) exp(-sum_sq / (2t)).

    Runs on u = log t with the shrinkage procedure on a bracket that covers
    the compact support of g, so no stepping out is needed.
    """
    half_ss = 0.5 * sum_sq

    def log_target(u: float) -> float:
        pdf = dens.pdf(math.exp(u))
        if pdf <= 0.0:
            return -math.inf
        return math.log(pdf) - 0.5 * block_size * u - half_ss * math.exp(-u) + u

    u0 = math.log(current)
    hi = math.log(dens.support)
    lo = min(math.log(max(half_ss, 1e-300)) - 45.0, u0 - 1.0)
    height = log_target(u0) - rng.exponential()
    if not np.isfinite(height):
        raise SamplerError(
            f"variance slice has no support: block_size={block_size}, "
            f"sum_sq={sum_sq:.3e}, current={current:.3e}"
        )
    for _ in range(max_evals):
        u = rng.uniform(lo, hi)
        if log_target(u) >= height:
            return math.exp(u)
        if u < u0:
            lo = u
        else:
            hi = u
    raise SamplerError(
        f"variance slice failed to converge: block_size={block_size}, "
        f"sum_sq={sum_sq:.3e}, current={current:.3e}, bracket=({lo:.3e},{hi:.3e})"
    )


def fit_block_gibbs(
    data: RegressionData,
    prior: BlockPriorFourier | BlockPriorWavelet,
    config: McmcConfig,
    reference: SeriesFunction | None = None,
) -> PosteriorDraws:
    """Blocked Gibbs: coefficients | variances by a joint Gaussian solve,
    variance | coefficients by slice sampling within the density support."""
    if not isinstance(prior, (BlockPriorFourier, BlockPriorWavelet)):
        raise DomainError("fit_block_gibbs expects a block prior")
    rng = np.random.default_rng(config.seed)
    dim = prior.dim
    basis = prior.basis
    levels = list(range(prior.max_level + 1))
    slices = [prior.level_slice(level) for level in levels]
    sizes = [sl.stop - sl.start for sl in slices]
    densities = [prior.variance_density(level) for level in levels]

    if data.n:
        psi = basis.design_matrix(data.design.points, dim)
        gram = psi.T @ psi / data.sigma**2
        lin = psi.T @ data.responses / data.sigma**2
    else:
        gram = np.zeros((dim, dim))
        lin = np.zeros(dim)

    variances = np.array([d.sample(rng) for d in densities])
    reference = reference if reference is not None else SeriesFunction(basis, np.zeros(1))
    kept: list[np.ndarray] = []
    kept_vars: list[np.ndarray] = []
    beta = np.zeros(dim)
    for it in range(config.iterations):
        precision = gram.copy()
        inv_diag = np.empty(dim)
        for sl, a in zip(slices, variances):
            inv_diag[sl] = 1.0 / max(a, 1e-300)
        precision[np.diag_indices(dim)] += inv_diag
        try:
            chol = linalg.cholesky(precision, lower=True, overwrite_a=True, check_finite=False)
        except linalg.LinAlgError as exc:
            raise NumericalError("block posterior precision factorization failed") from exc
        mean = linalg.cho_solve((chol, True), lin, check_finite=False)
        noise = linalg.solve_triangular(
            chol.T, rng.standard_normal(dim), lower=False, check_finite=False
        )
        beta = mean + noise
        for idx, (sl, dens, size) in enumerate(zip(slices, densities, sizes)):
            ssq = float(np.sum(beta[sl] ** 2))
            variances[idx] = _slice_variance_update(dens, size, ssq, variances[idx], rng)
        if it >= config.burn_in and (it - config.burn_in) % config.thin == 0:
            kept.append(beta.copy())
            kept_vars.append(variances.copy())

    draws = PosteriorDraws(
        basis=basis,
        coefficients=kept,
        acceptance={"coefficients": 1.0, "block_variance": 1.0},
        ess=1.0,
        seed=config.seed,
        extras={"variances": np.array(kept_vars)},
    )
    draws.ess = effective_sample_size(draws.l2_errors(reference))
    return draws


# ---------------------------------------------------------------------------
# reversible jump for the finite random series prior
# ---------------------------------------------------------------------------

class _ColumnCache:
    """Lazily grown matrix of basis columns evaluated at the design points."""

    def __init__(self, basis, points: np.ndarray, initial: int = 16):
        self.basis = basis
        self.points = points
        self._mat = np.empty((points.size, 0))
        self.grow(initial)

    def grow(self, m: int) -> None:
        have = self._mat.shape[1]
        if m <= have:
            return
        new = np.empty((self.points.size, m - have))
        for k in range(have + 1, m + 1):
            new[:, k - have - 1] = self.basis.eval_one(k, self.points)
        self._mat = np.hstack([self._mat, new])

    def column(self, k: int) -> np.ndarray:
        self.grow(k)
        return self._mat[:, k - 1]

    def matrix(self, m: int) -> np.ndarray:
        self.grow(m)
        return self._mat[:, :m]


class _AdaptiveScale:
    """Robbins-Monro step-size adaptation toward a target acceptance rate."""

    def __init__(self, scale: float, target: float = 0.3, enabled: bool = True):
        self.log_scale = math.log(scale)
        self.target = target
        self.enabled = enabled
        self.t = 0

    @property
    def scale(self) -> float:
        return math.exp(self.log_scale)

    def update(self, accepted: bool) -> None:
        if not self.enabled:
            return
        self.t += 1
        gain = self.t**-0.6
        self.log_scale += gain * ((1.0 if accepted else 0.0) - self.target)


class _MoveStats:
    def __init__(self, names):
        self.attempts = {name: 0 for name in names}
        self.accepts = {name: 0 for name in names}

    def record(self, name: str, accepted: bool, counting: bool) -> None:
        if counting:
            self.attempts[name] += 1
            self.accepts[name] += int(accepted)

    def rates(self) -> dict:
        return {
            name: (self.accepts[name] / self.attempts[name]) if self.attempts[name] else math.nan
            for name in self.attempts
        }


def fit_random_series_rjmcmc(
    data: RegressionData,
    prior: FiniteRandomSeriesPrior,
    config: McmcConfig,
    reference: SeriesFunction | None = None,
) -> PosteriorDraws:
    """Trans-dimensional sampler over (N, beta_1..beta_N).

    Birth appends a coefficient drawn from the coefficient prior (so the
    proposal density cancels and the ratio is model-prior times likelihood),
    death removes the last coefficient, and within-model moves are
    random-walk Metropolis on one coordinate with burn-in scale adaptation.
    """
    rng = np.random.default_rng(config.seed)
    basis = FourierBasis()
    p_birth, p_death, _ = config.move_probs
    sigma2 = data.sigma**2
    points = data.design.points if data.n else np.empty(0)
    cols = _ColumnCache(basis, np.atleast_1d(points))

    n_terms = prior.sample_terms(rng)
    beta = prior.sample_coef(rng, n_terms)
    cols.grow(n_terms)
    resid = data.responses - cols.matrix(n_terms) @ beta if data.n else np.empty(0)

    def sse(r: np.ndarray) -> float:
        return float(r @ r) if r.size else 0.0

    cur_sse = sse(resid)
    scale = _AdaptiveScale(config.proposal_scale, enabled=config.adapt)
    stats = _MoveStats(["birth", "death", "within"])
    kept: list[np.ndarray] = []
    n_trace: list[int] = []

    for it in range(config.iterations):
        counting = it >= config.burn_in
        u = rng.uniform()
        if u < p_birth:
            new_coef = float(prior.sample_coef(rng))
            col = cols.column(n_terms + 1)
            new_resid = resid - new_coef * col
            new_sse = sse(new_resid)
            log_accept = (
                prior.log_pmf_terms(n_terms + 1)
                - prior.log_pmf_terms(n_terms)
                + (cur_sse - new_sse) / (2.0 * sigma2)
                + math.log(p_death / p_birth)
            )
            accepted = math.log(rng.uniform()) < log_accept
            if accepted:
                beta = np.append(beta, new_coef)
                resid, cur_sse, n_terms = new_resid, new_sse, n_terms + 1
            stats.record("birth", accepted, counting)
        elif u < p_birth + p_death:
            if n_terms == 1:
                stats.record("death", False, counting)
            else:
                col = cols.column(n_terms)
                new_resid = resid + beta[-1] * col
                new_sse = sse(new_resid)
                log_accept = (
                    prior.log_pmf_terms(n_terms - 1)
                    - prior.log_pmf_terms(n_terms)
                    + (cur_sse - new_sse) / (2.0 * sigma2)
                    + math.log(p_birth / p_death)
                )
                accepted = math.log(rng.uniform()) < log_accept
                if accepted:
                    beta = beta[:-1]
                    resid, cur_sse, n_terms = new_resid, new_sse, n_terms - 1
                stats.record("death", accepted, counting)
        else:
            k = int(rng.integers(n_terms))
            proposal = beta[k] + scale.scale * rng.standard_normal()
            col = cols.column(k + 1)
            new_resid = resid - (proposal - beta[k]) * col
            new_sse = sse(new_resid)
            log_accept = (
                (cur_sse - new_sse) / (2.0 * sigma2)
                + float(prior.log_coef_density(proposal) - prior.log_coef_density(beta[k]))
            )
            accepted = math.log(rng.uniform()) < log_accept
            if accepted:
                beta = beta.copy()
                beta[k] = proposal
                resid, cur_sse = new_resid, new_sse
            stats.record("within", accepted, counting)
            if it < config.burn_in:
                scale.update(accepted)
        if counting and (it - config.burn_in) % config.thin == 0:
            kept.append(beta.copy())
            n_trace.append(n_terms)

    reference = reference if reference is not None else SeriesFunction(basis, np.zeros(1))
    draws = PosteriorDraws(
        basis=basis,
        coefficients=kept,
        acceptance=stats.rates(),
        ess=1.0,
        seed=config.seed,
        extras={"n_trace": np.asarray(n_trace), "proposal_scale": scale.scale},
    )
    draws.ess = effective_sample_size(draws.l2_errors(reference))
    return draws


def series_model_posterior(draws: PosteriorDraws, max_terms: int) -> np.ndarray:
    """Empirical posterior over the series length N from an RJ run, as a
    vector of frequencies for N = 1..max_terms (mass above is dropped)."""
    trace = draws.extras["n_trace"]
    pmf = np.zeros(max_terms)
    for m in range(1, max_terms + 1):
        pmf[m - 1] = np.mean(trace == m)
    return pmf


# ---------------------------------------------------------------------------
# exact model enumeration for the Gaussian coefficient sub-case
# ---------------------------------------------------------------------------

def series_model_posterior_exact(
    data: RegressionData, prior: FiniteRandomSeriesPrior, max_terms: int
) -> np.ndarray:
    """Exact P(N = m | data) for m <= max_terms when the coefficient prior is
    standard normal (tau = 2, tau0 = 1/2), via Gaussian marginal likelihoods
    y ~ N(0, sigma^2 I + Psi_m Psi_m')."""
    if not (abs(prior.tau - 2.0) < 1e-12 and abs(prior.tau0 - 0.5) < 1e-12):
        raise DomainError("exact enumeration needs the Gaussian sub-case tau=2, tau0=1/2")
    basis = FourierBasis()
    psi = basis.design_matrix(data.design.points, max_terms)
    y = data.responses
    logs = np.empty(max_terms)
    for m in range(1, max_terms + 1):
        cov = data.sigma**2 * np.eye(data.n) + psi[:, :m] @ psi[:, :m].T
        cho = linalg.cho_factor(cov, lower=True)
        logdet = 2.0 * float(np.sum(np.log(np.diag(cho[0]))))
        quad = float(y @ linalg.cho_solve(cho, y))
        logs[m - 1] = (
            prior.log_pmf_terms(m)
            - 0.5 * (logdet + quad + data.n * math.log(2.0 * math.pi))
        )
    logs -= logs.max()
    probs = np.exp(logs)
    return probs / probs.sum()


# ---------------------------------------------------------------------------
# random-walk cross-check sampler for the spline posterior
# ---------------------------------------------------------------------------

def fit_spline_mh(
    data: RegressionData,
    prior: GaussianSplinePrior,
    config: McmcConfig,
    reference: SeriesFunction | None = None,
) -> PosteriorDraws:
    """Coordinate random-walk Metropolis targeting the spline posterior;
    exists to cross-check the conjugate solve, not for production use."""
    rng = np.random.default_rng(config.seed)
    basis = prior.basis
    m = prior.dim
    bmat = basis.design_matrix(data.design.points, m) if data.n else np.zeros((0, m))
    y = data.responses
    sigma2 = data.sigma**2
    beta = np.zeros(m)
    resid = y - bmat @ beta
    cur_sse = float(resid @ resid)
    scale = _AdaptiveScale(config.proposal_scale, enabled=config.adapt)
    stats = _MoveStats(["within"])
    kept = []
    for it in range(config.iterations):
        counting = it >= config.burn_in
        for k in range(m):
            proposal = beta[k] + scale.scale * rng.standard_normal()
            new_resid = resid - (proposal - beta[k]) * bmat[:, k] if data.n else resid
            new_sse = float(new_resid @ new_resid) if data.n else 0.0
            log_accept = (cur_sse - new_sse) / (2.0 * sigma2) + 0.5 * (
                beta[k] ** 2 - proposal**2
            )
            accepted = math.log(rng.uniform()) < log_accept
            if accepted:
                beta[k] = proposal
                resid, cur_sse = new_resid, new_sse
            stats.record("within", accepted, counting)
            if it < config.burn_in:
                scale.update(accepted)
        if counting and (it - config.burn_in) % config.thin == 0:
            kept.append(beta.copy())
    reference = reference if reference is not None else SeriesFunction(basis, np.zeros(1))
    draws = PosteriorDraws(
        basis=basis,
        coefficients=kept,
        acceptance=stats.rates(),
        ess=1.0,
        seed=config.seed,
    )
    draws.ess = effective_sample_size(draws.l2_errors(reference))
    return draws


# ---------------------------------------------------------------------------
# sparse additive sampler
# ---------------------------------------------------------------------------

@dataclass
class AdditivePosteriorDraws:
    """Draws from the sparse additive sampler with selection diagnostics."""

    p: int
    mus: np.ndarray
    zs: np.ndarray
    n_terms: np.ndarray
    raw_coefficients: list
    acceptance: dict
    ess: float
    seed: int

    def __len__(self) -> int:
        return self.mus.size

    def inclusion_probabilities(self) -> np.ndarray:
        return self.zs.mean(axis=0)

    def functions(self) -> list[AdditiveFunction]:
        out = []
        for d in range(len(self)):
            comps = tuple(
                SeriesFunction(FourierBasis(), center_component(self.raw_coefficients[d][j]))
                for j in range(self.p)
            )
            out.append(AdditiveFunction(float(self.mus[d]), comps, self.zs[d]))
        return out

    def l2_errors(self, reference: AdditiveFunction) -> np.ndarray:
        ref_coefs = [
            reference.components[j].coefficients if reference.active[j] else np.zeros(1)
            for j in range(self.p)
        ]
        errors = np.empty(len(self))
        for d in range(len(self)):
            total = (self.mus[d] - reference.mu) ** 2
            for j in range(self.p):
                if self.zs[d, j]:
                    full = center_component(self.raw_coefficients[d][j])
                else:
                    full = np.zeros(1)
                pa, pb = _padded_pair(full, ref_coefs[j])
                total += float(np.sum((pa - pb) ** 2))
            errors[d] = math.sqrt(total)
        return errors

    def to_jsonl(self, path) -> None:
        with open(path, "w") as handle:
            for fn in self.functions():
                handle.write(fn.to_json() + "\n")


def fit_sparse_additive(
    data: RegressionData,
    prior: SparseAdditivePrior,
    config: McmcConfig,
    reference: AdditiveFunction | None = None,
    allow_flips: bool = True,
    init_active: np.ndarray | None = None,
) -> AdditivePosteriorDraws:
    """Metropolis-within-Gibbs over (mu, z, N, component coefficients).

    Each sweep updates mu by a random walk, attempts one inclusion flip with
    a birth-from-prior coefficient proposal, then applies one random-series
    move (shared-N birth/death or per-component coordinate walks). Component
    coefficient vectors are rebuilt through ``center_component`` after every
    accepted coefficient move so components keep zero integral.
    """
    p = prior.p
    if p < 1:
        raise DomainError("dimension p must be >= 1")
    rng = np.random.default_rng(config.seed)
    basis = FourierBasis()
    series = prior.series
    p_birth, p_death, _ = config.move_probs
    sigma2 = data.sigma**2
    n = data.n
    if n:
        pts = data.design.points
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.shape[1] != p:
            raise DomainError(f"design has {pts.shape[1]} columns, expected {p}")
        caches = [_ColumnCache(basis, pts[:, j]) for j in range(p)]
    else:
        caches = [_ColumnCache(basis, np.empty(0)) for _ in range(p)]
    y = data.responses

    def comp_values(j: int, raw: np.ndarray) -> np.ndarray:
        # full coefficients via centering; constant term is exact for this basis
        full = center_component(raw)
        return caches[j].matrix(full.size) @ full if n else np.empty(0)

    # initial state from the prior
    z = (
        rng.uniform(size=p) < prior.inclusion_prob
        if init_active is None
        else np.asarray(init_active, dtype=bool).copy()
    )
    n_terms = series.sample_terms(rng)
    raw = [series.sample_coef(rng, n_terms - 1) if n_terms > 1 else np.empty(0) for _ in range(p)]
    mu = float(rng.standard_normal())
    comp_vals = np.zeros((p, n))
    for j in range(p):
        if z[j]:
            comp_vals[j] = comp_values(j, raw[j])
    fitted = mu + comp_vals[z].sum(axis=0) if n else np.empty(0)
    resid = y - fitted
    cur_sse = float(resid @ resid) if n else 0.0

    scale = _AdaptiveScale(config.proposal_scale, enabled=config.adapt)
    mu_scale = _AdaptiveScale(config.mu_proposal_scale, enabled=config.adapt)
    stats = _MoveStats(["mu", "flip", "birth", "death", "within"])
    # p = 1 makes inclusion certain: the off state has prior mass zero
    log_odds_on = (
        math.inf
        if prior.inclusion_prob >= 1.0
        else math.log(prior.inclusion_prob) - math.log1p(-prior.inclusion_prob)
    )

    mus, zs, ns, raws = [], [], [], []
    for it in range(config.iterations):
        counting = it >= config.burn_in

        # mean update
        proposal = mu + mu_scale.scale * rng.standard_normal()
        new_resid = resid - (proposal - mu) if n else resid
        new_sse = float(new_resid @ new_resid) if n else 0.0
        log_accept = (cur_sse - new_sse) / (2.0 * sigma2) + 0.5 * (mu**2 - proposal**2)
        accepted = math.log(rng.uniform()) < log_accept
        if accepted:
            mu, resid, cur_sse = proposal, new_resid, new_sse
        stats.record("mu", accepted, counting)
        if it < config.burn_in:
            mu_scale.update(accepted)

        # inclusion flip with birth-from-prior coefficients
        if allow_flips:
            j = int(rng.integers(p))
            if z[j]:
                new_resid = resid + comp_vals[j] if n else resid
                new_sse = float(new_resid @ new_resid) if n else 0.0
                log_accept = (cur_sse - new_sse) / (2.0 * sigma2) - log_odds_on
                accepted = math.log(rng.uniform()) < log_accept
                if accepted:
                    z[j] = False
                    resid, cur_sse = new_resid, new_sse
            else:
                cand = series.sample_coef(rng, n_terms - 1) if n_terms > 1 else np.empty(0)
                cand_vals = comp_values(j, cand)
                new_resid = resid - cand_vals if n else resid
                new_sse = float(new_resid @ new_resid) if n else 0.0
                log_accept = (cur_sse - new_sse) / (2.0 * sigma2) + log_odds_on
                accepted = math.log(rng.uniform()) < log_accept
                if accepted:
                    z[j] = True
                    raw[j] = cand
                    comp_vals[j] = cand_vals
                    resid, cur_sse = new_resid, new_sse
            stats.record("flip", accepted, counting)

        # shared series-length move or within-model walks
        u = rng.uniform()
        if u < p_birth:
            cand_cols = [series.sample_coef(rng) for _ in range(p)]
            delta = np.zeros(n)
            if n:
                for j in range(p):
                    if z[j]:
                        delta += cand_cols[j] * caches[j].matrix(n_terms + 1)[:, n_terms]
            new_resid = resid - delta if n else resid
            new_sse = float(new_resid @ new_resid) if n else 0.0
            log_accept = (
                series.log_pmf_terms(n_terms + 1)
                - series.log_pmf_terms(n_terms)
                + (cur_sse - new_sse) / (2.0 * sigma2)
                + math.log(p_death / p_birth)
            )
            accepted = math.log(rng.uniform()) < log_accept
            if accepted:
                n_terms += 1
                for j in range(p):
                    raw[j] = np.append(raw[j], cand_cols[j])
                    if z[j]:
                        comp_vals[j] = comp_values(j, raw[j])
                resid, cur_sse = new_resid, new_sse
            stats.record("birth", accepted, counting)
        elif u < p_birth + p_death:
            if n_terms == 1:
                stats.record("death", False, counting)
            else:
                delta = np.zeros(n)
                if n:
                    for j in range(p):
                        if z[j]:
                            delta += raw[j][-1] * caches[j].matrix(n_terms)[:, n_terms - 1]
                new_resid = resid + delta if n else resid
                new_sse = float(new_resid @ new_resid) if n else 0.0
                log_accept = (
                    series.log_pmf_terms(n_terms - 1)
                    - series.log_pmf_terms(n_terms)
                    + (cur_sse - new_sse) / (2.0 * sigma2)
                    + math.log(p_birth / p_death)
                )
                accepted = math.log(rng.uniform()) < log_accept
                if accepted:
                    n_terms -= 1
                    for j in range(p):
                        raw[j] = raw[j][:-1]
                        if z[j]:
                            comp_vals[j] = comp_values(j, raw[j])
                    resid, cur_sse = new_resid, new_sse
                stats.record("death", accepted, counting)
        else:
            if n_terms > 1:
                for j in range(p):
                    if not z[j]:
                        continue
                    k = int(rng.integers(n_terms - 1))
                    proposal = raw[j][k] + scale.scale * rng.standard_normal()
                    if n:
                        col = caches[j].matrix(k + 2)[:, k + 1]
                        new_resid = resid - (proposal - raw[j][k]) * col
                        new_sse = float(new_resid @ new_resid)
                    else:
                        new_resid, new_sse = resid, 0.0
                    log_accept = (cur_sse - new_sse) / (2.0 * sigma2) + float(
                        series.log_coef_density(proposal) - series.log_coef_density(raw[j][k])
                    )
                    accepted = math.log(rng.uniform()) < log_accept
                    if accepted:
                        raw[j] = raw[j].copy()
                        raw[j][k] = proposal
                        comp_vals[j] = comp_values(j, raw[j])
                        resid, cur_sse = new_resid, new_sse
                    stats.record("within", accepted, counting)
                    if it < config.burn_in:
                        scale.update(accepted)

        if counting and (it - config.burn_in) % config.thin == 0:
            mus.append(mu)
            zs.append(z.copy())
            ns.append(n_terms)
            raws.append([r.copy() for r in raw])

    if not mus:
        raise ConfigError("sparse additive sampler kept no draws")
    draws = AdditivePosteriorDraws(
        p=p,
        mus=np.asarray(mus),
        zs=np.asarray(zs, dtype=bool),
        n_terms=np.asarray(ns),
        raw_coefficients=raws,
        acceptance=stats.rates(),
        ess=1.0,
        seed=config.seed,
    )
    if reference is not None:
        draws.ess = effective_sample_size(draws.l2_errors(reference))
    else:
        draws.ess = effective_sample_size(draws.mus)
    return draws
