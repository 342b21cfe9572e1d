"""End-to-end contraction experiments: simulate, fit, tabulate, fit slopes.

The pipeline is a pure function of (config, master seed).  Every
(n, replication) cell derives its RNG from
``SeedSequence(master, spawn_key=(CELL_DOMAIN, n_index, replication))``,
so results are independent of worker count and execution order; the
parallel path fans cells out over a process pool and reassembles rows in
a fixed order.

Config files are flat ``key = value`` text with dotted keys, e.g.::

    prior.kind = gaussian_spline
    prior.order = 4
    prior.m_exponent = 0.333333333
    truth.kind = holder
    truth.alpha = 1.0
    truth.radius = 2.0
    truth.truncation = 200
    truth.seed = 7
    grid.n = 100,200,400,800,1600,3200,6400
    replications = 20
    sigma = 1.0
    design.kind = random-uniform
    seed = 20240811

See the README for the full key reference.
"""

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .design import EQUIDISTANT, RANDOM_UNIFORM, equidistant_design, uniform_design
from .errors import ConfigError, DomainError
from .funcspace import AdditiveFunction, SmoothnessBall, make_truth
from .inference import (
    McmcConfig,
    RegressionData,
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
    default_truncation_level,
)

CELL_DOMAIN = 1  # spawn-key namespace for (n, replication) cells

PRIOR_KINDS = (
    "gaussian_spline",
    "finite_series",
    "block_fourier",
    "block_wavelet",
    "segp",
    "sparse_additive",
)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a contraction study needs, resolvable per sample size."""

    prior_kind: str
    n_grid: tuple
    replications: int
    master_seed: int
    sigma: float = 1.0
    design_kind: str = RANDOM_UNIFORM
    # truth
    truth_kind: str = "holder"
    truth_alpha: float = 1.0
    truth_radius: float = 2.0
    truth_truncation: int = 200
    truth_seed: int = 7
    truth_mu: float = 0.5
    truth_active: int = 2
    # prior hyperparameters
    spline_order: int = 4
    m_exponent: float = 1.0 / 3.0
    series_lambda: float = 1.0
    series_tau: float = 2.0
    series_tau0: float = 0.5
    block_max_level: int | None = None
    gp_jitter: float = 1e-10
    additive_p: int = 10
    # sampler
    mcmc_iterations: int = 4000
    mcmc_burn_in: int = 1000
    mcmc_thin: int = 1
    mcmc_proposal_scale: float = 0.5
    posterior_draws: int = 500
    error_grid: int = 2048
    threads: int = 1
    # test-power settings (used by the power study, not contraction runs)
    power_n_grid: tuple = (50, 100, 200, 400)
    power_shift: float = 0.25
    power_shift_index: int = 2
    power_replications: int = 10000
    # prior sampling (CLI sample-prior)
    sample_draws: int = 16
    # one-dataset fit (CLI fit)
    fit_n: int | None = None

    def __post_init__(self):
        if self.prior_kind not in PRIOR_KINDS:
            raise ConfigError(f"prior.kind must be one of {PRIOR_KINDS}, got {self.prior_kind!r}")
        grid = tuple(int(n) for n in self.n_grid)
        if len(grid) < 1 or any(n < 1 for n in grid) or any(
            b <= a for a, b in zip(grid, grid[1:])
        ):
            raise ConfigError("grid.n must be a strictly increasing list of positive sizes")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.sigma < 0:
            raise ConfigError("sigma must be >= 0")
        if self.design_kind not in (RANDOM_UNIFORM, EQUIDISTANT):
            raise ConfigError(f"unknown design.kind {self.design_kind!r}")
        if self.mcmc_iterations <= self.mcmc_burn_in:
            raise ConfigError("mcmc.iterations must exceed mcmc.burn_in")
        if self.posterior_draws < 1:
            raise ConfigError("posterior_draws must be >= 1")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        object.__setattr__(self, "n_grid", grid)
        object.__setattr__(self, "power_n_grid", tuple(int(n) for n in self.power_n_grid))

    # derived pieces ------------------------------------------------------------
    def truth_ball(self) -> SmoothnessBall:
        return SmoothnessBall(self.truth_kind, self.truth_alpha, self.truth_radius)

    def truth(self):
        """The fixed reference function for the whole study."""
        if self.prior_kind == "sparse_additive":
            ball = self.truth_ball()
            comp_seeds = np.random.SeedSequence(self.truth_seed).generate_state(self.additive_p)
            comps = []
            active = np.zeros(self.additive_p, dtype=bool)
            for j in range(self.additive_p):
                comps.append(
                    make_truth(ball, int(comp_seeds[j]), self.truth_truncation, zero_mean=True)
                )
                active[j] = j < self.truth_active
            return AdditiveFunction(self.truth_mu, tuple(comps), active)
        return make_truth(self.truth_ball(), self.truth_seed, self.truth_truncation)

    def spline_dimension(self, n: int) -> int:
        return max(int(math.ceil(n**self.m_exponent)), self.spline_order)

    def prior_for(self, n: int):
        if self.prior_kind == "gaussian_spline":
            m = self.spline_dimension(n)
            return GaussianSplinePrior.for_dimension(m, self.spline_order)
        if self.prior_kind == "finite_series":
            return FiniteRandomSeriesPrior(self.series_lambda, self.series_tau, self.series_tau0)
        if self.prior_kind in ("block_fourier", "block_wavelet"):
            level = self.block_max_level
            if level is None:
                level = default_truncation_level(max(self.n_grid))
            cls = BlockPriorFourier if self.prior_kind == "block_fourier" else BlockPriorWavelet
            return cls(level)
        if self.prior_kind == "segp":
            return SEGPPrior(self.gp_jitter)
        return SparseAdditivePrior(
            self.additive_p,
            FiniteRandomSeriesPrior(self.series_lambda, self.series_tau, self.series_tau0),
        )

    def mcmc_config(self, seed: int) -> McmcConfig:
        return McmcConfig(
            iterations=self.mcmc_iterations,
            burn_in=self.mcmc_burn_in,
            thin=self.mcmc_thin,
            seed=seed,
            proposal_scale=self.mcmc_proposal_scale,
        )


_KEY_MAP = {
    "prior.kind": ("prior_kind", str),
    "prior.order": ("spline_order", int),
    "prior.m_exponent": ("m_exponent", float),
    "prior.lambda": ("series_lambda", float),
    "prior.tau": ("series_tau", float),
    "prior.tau0": ("series_tau0", float),
    "prior.max_level": ("block_max_level", int),
    "prior.jitter": ("gp_jitter", float),
    "prior.p": ("additive_p", int),
    "truth.kind": ("truth_kind", str),
    "truth.alpha": ("truth_alpha", float),
    "truth.radius": ("truth_radius", float),
    "truth.truncation": ("truth_truncation", int),
    "truth.seed": ("truth_seed", int),
    "truth.mu": ("truth_mu", float),
    "truth.active": ("truth_active", int),
    "grid.n": ("n_grid", "int_list"),
    "replications": ("replications", int),
    "sigma": ("sigma", float),
    "design.kind": ("design_kind", str),
    "seed": ("master_seed", int),
    "threads": ("threads", int),
    "mcmc.iterations": ("mcmc_iterations", int),
    "mcmc.burn_in": ("mcmc_burn_in", int),
    "mcmc.thin": ("mcmc_thin", int),
    "mcmc.proposal_scale": ("mcmc_proposal_scale", float),
    "posterior_draws": ("posterior_draws", int),
    "error_grid": ("error_grid", int),
    "power.n": ("power_n_grid", "int_list"),
    "power.shift": ("power_shift", float),
    "power.shift_index": ("power_shift_index", int),
    "power.replications": ("power_replications", int),
    "sample.draws": ("sample_draws", int),
    "fit.n": ("fit_n", int),
}


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse the flat dotted-key format; unknown keys are an error."""
    values = {}
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {rawline!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _KEY_MAP:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        attr, kind = _KEY_MAP[key]
        try:
            if kind == "int_list":
                value = tuple(int(part.strip()) for part in raw.split(",") if part.strip())
            elif kind is int:
                value = int(raw) if raw.lower() != "auto" else None
            elif kind is float:
                value = float(raw)
            else:
                value = raw
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: cannot parse value for {key!r}: {raw!r}") from exc
        values[attr] = value
    missing = [k for k in ("prior_kind", "n_grid", "replications", "master_seed") if k not in values]
    if missing:
        raise ConfigError(f"config is missing required keys: {missing}")
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config_text(text)


# ---------------------------------------------------------------------------
# rate table and slope fit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateRow:
    n: int
    replication: int
    err_mean: float
    err_q50: float
    err_q90: float


@dataclass
class RateTable:
    """Per-(n, replication) posterior error summaries."""

    rows: list

    def __post_init__(self):
        for row in self.rows:
            vals = (row.err_mean, row.err_q50, row.err_q90)
            if any(not np.isfinite(v) or v < 0 for v in vals):
                raise DomainError(f"invalid error summary in row {row}")

    def n_values(self) -> list[int]:
        return sorted({row.n for row in self.rows})

    def statistic(self, name: str, n: int) -> np.ndarray:
        return np.array([getattr(row, name) for row in self.rows if row.n == n])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as handle:
            handle.write("n,replication,err_mean,err_q50,err_q90\n")
            for row in self.rows:
                handle.write(
                    f"{row.n},{row.replication},"
                    f"{row.err_mean:.17g},{row.err_q50:.17g},{row.err_q90:.17g}\n"
                )

    @staticmethod
    def from_csv(path) -> "RateTable":
        rows = []
        with open(path) as handle:
            header = handle.readline().strip()
            if header != "n,replication,err_mean,err_q50,err_q90":
                raise ConfigError(f"unexpected rate-table header: {header!r}")
            for line in handle:
                n, rep, em, q50, q90 = line.strip().split(",")
                rows.append(RateRow(int(n), int(rep), float(em), float(q50), float(q90)))
        return RateTable(rows)


@dataclass(frozen=True)
class RateFit:
    """Least-squares log-log decay estimate across sample sizes."""

    slope: float
    stderr: float
    intercept: float
    r2: float
    n_values: tuple

    def to_json(self) -> str:
        return json.dumps(
            {
                "slope": self.slope,
                "stderr": self.stderr,
                "intercept": self.intercept,
                "r2": self.r2,
                "n_values": list(self.n_values),
            }
        )


def fit_rate_slope(table: RateTable, statistic: str = "err_mean") -> RateFit:
    """OLS of log(mean error over replications) on log n."""
    if statistic not in ("err_mean", "err_q50", "err_q90"):
        raise DomainError(f"unknown error statistic {statistic!r}")
    ns = table.n_values()
    if len(ns) < 3:
        raise DomainError("slope fitting needs at least 3 distinct sample sizes")
    log_n = np.log(np.array(ns, dtype=float))
    log_err = np.log([float(np.mean(table.statistic(statistic, n))) for n in ns])
    design = np.vstack([log_n, np.ones_like(log_n)]).T
    coef, *_ = np.linalg.lstsq(design, log_err, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    fitted = design @ coef
    resid = log_err - fitted
    dof = len(ns) - 2
    total = float(np.sum((log_err - log_err.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / total if total > 0 else 1.0
    sxx = float(np.sum((log_n - log_n.mean()) ** 2))
    stderr = math.sqrt(float(np.sum(resid**2)) / dof / sxx) if dof > 0 else math.nan
    return RateFit(slope, stderr, intercept, r2, tuple(ns))


# ---------------------------------------------------------------------------
# study execution
# ---------------------------------------------------------------------------

def cell_rng(master_seed: int, n_index: int, replication: int) -> np.random.Generator:
    """Counter-derived generator: independent per cell, order-independent."""
    return np.random.default_rng(
        np.random.SeedSequence(master_seed, spawn_key=(CELL_DOMAIN, n_index, replication))
    )


def _posterior_errors(config: ExperimentConfig, prior, data: RegressionData, truth, rng) -> np.ndarray:
    """Vector of posterior-draw L2 errors against the truth for one dataset."""
    if config.prior_kind == "gaussian_spline":
        post = fit_spline_conjugate(data, prior)
        return post.sample_errors(rng, config.posterior_draws, truth, config.error_grid)
    if config.prior_kind == "segp":
        grid = (np.arange(config.error_grid) + 0.5) / config.error_grid
        post = fit_gp(data, prior, grid)
        samples = post.sample(rng, config.posterior_draws)
        truth_vals = truth(grid)
        return np.sqrt(np.mean((samples - truth_vals[None, :]) ** 2, axis=1))
    mcmc = config.mcmc_config(int(rng.integers(2**63)))
    if config.prior_kind in ("block_fourier", "block_wavelet"):
        draws = fit_block_gibbs(data, prior, mcmc, reference=truth)
        return draws.l2_errors(truth)
    if config.prior_kind == "finite_series":
        draws = fit_random_series_rjmcmc(data, prior, mcmc, reference=truth)
        return draws.l2_errors(truth)
    draws = fit_sparse_additive(data, prior, mcmc, reference=truth)
    return draws.l2_errors(truth)


def run_cell(config: ExperimentConfig, n_index: int, replication: int) -> RateRow:
    """One (sample size, replication) cell; the parallel unit of work."""
    n = config.n_grid[n_index]
    try:
        rng = cell_rng(config.master_seed, n_index, replication)
        truth = config.truth()
        p = config.additive_p if config.prior_kind == "sparse_additive" else 1
        if config.design_kind == EQUIDISTANT:
            if p != 1:
                raise ConfigError("equidistant designs are one-dimensional")
            design = equidistant_design(n)
        else:
            design = uniform_design(n, p, int(rng.integers(2**63)))
        data = RegressionData.simulate(truth, design, config.sigma, rng)
        prior = config.prior_for(n)
        errors = _posterior_errors(config, prior, data, truth, rng)
        return RateRow(
            n,
            replication,
            float(np.mean(errors)),
            float(np.quantile(errors, 0.5)),
            float(np.quantile(errors, 0.9)),
        )
    except ConfigError:
        raise
    except Exception as exc:
        raise RuntimeError(
            f"cell (n={n}, replication={replication}, master_seed={config.master_seed}) failed"
        ) from exc


def _run_cell_args(args) -> RateRow:
    return run_cell(*args)


def run_contraction_study(config: ExperimentConfig, threads: int | None = None) -> RateTable:
    """Full study: simulate, fit, and summarize every (n, replication) cell.

    Deterministic given (config, master seed) including under parallel
    execution; rows are ordered by (n, replication).
    """
    threads = config.threads if threads is None else threads
    tasks = [
        (config, n_index, replication)
        for n_index in range(len(config.n_grid))
        for replication in range(config.replications)
    ]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_run_cell_args, tasks, chunksize=1))
    else:
        rows = [run_cell(*task) for task in tasks]
    rows.sort(key=lambda row: (row.n, row.replication))
    return RateTable(rows)


def with_overrides(config: ExperimentConfig, **kwargs) -> ExperimentConfig:
    return replace(config, **kwargs)
