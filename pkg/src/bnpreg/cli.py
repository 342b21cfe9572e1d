"""Command-line interface.

Subcommands::

    bnpreg sample-prior     --config C --out-dir D   prior draws -> draws.jsonl (+ figure)
    bnpreg fit              --config C --out-dir D   one dataset -> draws.jsonl, summary.json (+ figure)
    bnpreg contract         --config C --out-dir D   full study -> rate_table.csv, rate_fit.json (+ figure)
    bnpreg test-power       --config C --out-dir D   type I/II table -> test_power.csv (+ figure)
    bnpreg check-conditions --config C --out-dir D   block/orthonormality/discrepancy reports

Exit codes: 0 success, 2 configuration problem, 1 runtime failure.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import report
from .basis import FourierBasis, HaarWaveletBasis, orthonormality_check
from .design import equidistant_design, uniform_design
from .errors import BnpregError, ConfigError
from .funcspace import SeriesFunction
from .harness import (
    fit_rate_slope,
    load_config,
    run_contraction_study,
    with_overrides,
)
from .inference import (
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
    fitted_block_constants,
    sample_prior,
    verify_block_conditions,
)
from .testing import TestConfig, mc_type1_error, mc_type2_error, write_estimates_csv


def _resolved_config(args):
    config = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.threads is not None:
        overrides["threads"] = args.threads
    return with_overrides(config, **overrides) if overrides else config


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_sample_prior(args) -> int:
    config = _resolved_config(args)
    out = _out_dir(args)
    n_ref = max(config.n_grid)
    prior = config.prior_for(n_ref)
    draws = [
        sample_prior(prior, int(np.random.SeedSequence(config.master_seed, spawn_key=(9, i)).generate_state(1)[0]))
        for i in range(config.sample_draws)
    ]
    path = out / "draws.jsonl"
    with open(path, "w") as handle:
        for d in draws:
            if isinstance(d, tuple):
                grid, vals = d
                handle.write(json.dumps({"basis": "grid", "params": {"grid": grid.tolist()},
                                         "coefficients": vals.tolist()}) + "\n")
            else:
                handle.write(d.to_json() + "\n")
    plottable = [d for d in draws if isinstance(d, tuple) or not hasattr(d, "active")]
    if plottable:
        report.render_draw_plot(plottable, out / "prior_draws.png")
    print(f"wrote {path}")
    return 0


def cmd_fit(args) -> int:
    config = _resolved_config(args)
    out = _out_dir(args)
    n = config.fit_n if config.fit_n is not None else config.n_grid[0]
    n_index = config.n_grid.index(n) if n in config.n_grid else 0
    rng = np.random.default_rng(np.random.SeedSequence(config.master_seed, spawn_key=(2, n_index)))
    truth = config.truth()
    p = config.additive_p if config.prior_kind == "sparse_additive" else 1
    design = (
        equidistant_design(n)
        if config.design_kind == "equidistant"
        else uniform_design(n, p, int(rng.integers(2**63)))
    )
    data = RegressionData.simulate(truth, design, config.sigma, rng)
    prior = config.prior_for(n)
    mcmc = config.mcmc_config(int(rng.integers(2**63)))
    summary = {
        "n": n,
        "prior": config.prior_kind,
        "sigma": config.sigma,
        "design": design.to_jsonable(),
    }
    draws_path = out / "draws.jsonl"
    if config.prior_kind == "gaussian_spline":
        post = fit_spline_conjugate(data, prior)
        fns = post.sample_functions(rng, config.posterior_draws)
        with open(draws_path, "w") as handle:
            for fn in fns:
                handle.write(fn.to_json() + "\n")
        mean_fn = SeriesFunction(post.basis, post.mean)
        report.render_fit_plot(truth, mean_fn, data, out / "fit.png")
        summary["posterior_mean_norm"] = float(np.linalg.norm(post.mean))
    elif config.prior_kind == "segp":
        grid = (np.arange(config.error_grid) + 0.5) / config.error_grid
        post = fit_gp(data, prior, grid)
        with open(draws_path, "w") as handle:
            for row in post.sample(rng, config.posterior_draws):
                handle.write(json.dumps({"basis": "grid", "params": {"grid": grid.tolist()},
                                         "coefficients": row.tolist()}) + "\n")
        report.render_fit_plot(truth, lambda xs: np.interp(xs, grid, post.mean), data, out / "fit.png")
        summary["posterior_mean_norm"] = float(np.sqrt(np.mean(post.mean**2)))
    else:
        if config.prior_kind in ("block_fourier", "block_wavelet"):
            draws = fit_block_gibbs(data, prior, mcmc, reference=truth)
        elif config.prior_kind == "finite_series":
            draws = fit_random_series_rjmcmc(data, prior, mcmc, reference=truth)
        else:
            draws = fit_sparse_additive(data, prior, mcmc, reference=truth)
        draws.to_jsonl(draws_path)
        summary["acceptance"] = draws.acceptance
        summary["ess"] = draws.ess
        if hasattr(draws, "basis"):
            mat = np.zeros((len(draws.coefficients), max(c.size for c in draws.coefficients)))
            for i, c in enumerate(draws.coefficients):
                mat[i, : c.size] = c
            mean_fn = SeriesFunction(draws.basis, mat.mean(axis=0))
            report.render_fit_plot(truth, mean_fn, data, out / "fit.png")
        errors = draws.l2_errors(truth)
        summary["err_mean"] = float(np.mean(errors))
    with open(out / "summary.json", "w") as handle:
        json.dump(summary, handle, indent=2)
    print(f"wrote {draws_path} and {out / 'summary.json'}")
    return 0


def cmd_contract(args) -> int:
    config = _resolved_config(args)
    out = _out_dir(args)
    table = run_contraction_study(config)
    fit = fit_rate_slope(table)
    table_path = out / "rate_table.csv"
    fit_path = out / "rate_fit.json"
    table.to_csv(table_path)
    with open(fit_path, "w") as handle:
        handle.write(fit.to_json() + "\n")
    report.render_rate_plot(table, fit, out / "rate_plot.png")
    print(f"wrote {table_path}, {fit_path}; slope = {fit.slope:.4f} (se {fit.stderr:.4f})")
    return 0


def cmd_test_power(args) -> int:
    config = _resolved_config(args)
    out = _out_dir(args)
    truth = config.truth()
    if not isinstance(truth, SeriesFunction):
        raise ConfigError("test-power needs a one-dimensional series truth")
    shift = np.zeros(max(config.power_shift_index, truth.coefficients.size))
    shift[: truth.coefficients.size] = truth.coefficients
    shift[config.power_shift_index - 1] += config.power_shift
    f1 = SeriesFunction(FourierBasis(), shift)
    estimates = []
    for i, n in enumerate(config.power_n_grid):
        tcfg = TestConfig(
            replications=config.power_replications,
            seed=int(np.random.SeedSequence(config.master_seed, spawn_key=(3, i)).generate_state(1)[0]),
        )
        estimates.append(mc_type1_error(truth, f1, n, tcfg, sigma=max(config.sigma, 1e-8)))
        estimates.append(mc_type2_error(f1, truth, f1, n, tcfg, sigma=max(config.sigma, 1e-8)))
    path = out / "test_power.csv"
    write_estimates_csv(estimates, path)
    report.render_power_plot(estimates, out / "error_decay.png")
    print(f"wrote {path}")
    return 0


def cmd_check_conditions(args) -> int:
    config = _resolved_config(args)
    out = _out_dir(args)
    prior = config.prior_for(max(config.n_grid))
    payload = {}
    if isinstance(prior, (BlockPriorFourier, BlockPriorWavelet)):
        c1, c2, c3 = fitted_block_constants(prior)
        cond = verify_block_conditions(prior, c1, c2, c3)
        payload["block_conditions"] = {
            "constants": {"c1": c1, "c2": c2, "c3": c3},
            "all_ok": cond["all_ok"],
            "levels": {
                str(level): {k: bool(v) if isinstance(v, (bool, np.bool_)) else float(v)
                             for k, v in row.items()}
                for level, row in cond.items()
                if isinstance(level, int)
            },
        }
        report.render_condition_plot(cond, out / "block_conditions.png")
    payload["orthonormality"] = {
        "fourier_max_deviation_k16": orthonormality_check(FourierBasis(), 16, 8192),
        "haar_max_deviation_J3": orthonormality_check(HaarWaveletBasis(3), 15, 4096),
    }
    disc_rows = []
    for n in (10, 100, 1000):
        from .design import discrepancy

        d_eq = discrepancy(equidistant_design(n))
        d_un = discrepancy(uniform_design(n, 1, config.master_seed + n))
        disc_rows.append({"n": n, "equidistant": d_eq, "equidistant_times_n": n * d_eq,
                          "uniform": d_un})
    payload["discrepancy"] = disc_rows
    path = out / "conditions_report.json"
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=2)
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bnpreg",
        description="Nonparametric regression priors, posterior samplers, and rate studies.",
    )
    sub = parser.add_subparsers(dest="command")
    for name, fn in (
        ("sample-prior", cmd_sample_prior),
        ("fit", cmd_fit),
        ("contract", cmd_contract),
        ("test-power", cmd_test_power),
        ("check-conditions", cmd_check_conditions),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to a flat key=value config file")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
        p.add_argument("--out-dir", default=".", help="directory for outputs")
        p.add_argument("--threads", type=int, default=None, help="worker processes for studies")
        p.set_defaults(handler=fn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "handler", None):
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except BnpregError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
