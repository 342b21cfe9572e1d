"""Figure rendering for the CLI report paths.

Every report subcommand writes its delimited output first and then an
accompanying PNG next to it; the figures are conveniences, the data files
are the interface.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

plt.rcParams["figure.dpi"] = 150
plt.rcParams["savefig.bbox"] = "tight"
plt.rcParams["axes.grid"] = True
plt.rcParams["grid.alpha"] = 0.3


def render_rate_plot(table, fit, path, statistic: str = "err_mean") -> None:
    """Log-log scatter of per-replication errors with the fitted decay line."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ns = table.n_values()
    for n in ns:
        vals = table.statistic(statistic, n)
        ax.plot([n] * vals.size, vals, "o", color="steelblue", alpha=0.35, markersize=4)
    means = [float(np.mean(table.statistic(statistic, n))) for n in ns]
    ax.plot(ns, means, "s-", color="navy", label="mean over replications")
    grid = np.array(ns, dtype=float)
    ax.plot(
        grid,
        np.exp(fit.intercept) * grid**fit.slope,
        "--",
        color="crimson",
        label=f"fit: slope {fit.slope:.3f} (se {fit.stderr:.3f})",
    )
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("sample size n")
    ax.set_ylabel(f"posterior L2 error ({statistic})")
    ax.legend()
    fig.savefig(path)
    plt.close(fig)


def render_power_plot(estimates, path) -> None:
    """Error-rate decay over n for each statistic, log-scale vertical axis."""
    fig, ax = plt.subplots(figsize=(6, 4))
    by_name = {}
    for est in estimates:
        by_name.setdefault(est.statistic, []).append(est)
    for name, rows in by_name.items():
        rows = sorted(rows, key=lambda r: r.n)
        ns = [r.n for r in rows]
        vals = [max(r.estimate, 0.5 / r.replications) for r in rows]
        errs = [r.std_error for r in rows]
        ax.errorbar(ns, vals, yerr=errs, marker="o", capsize=3, label=name)
    ax.set_yscale("log")
    ax.set_xlabel("sample size n")
    ax.set_ylabel("Monte Carlo error rate")
    ax.legend()
    fig.savefig(path)
    plt.close(fig)


def render_condition_plot(report, path) -> None:
    """Per-level margins of the three block-density conditions (log scale)."""
    levels = sorted(k for k in report if isinstance(k, int))
    fig, ax = plt.subplots(figsize=(6, 4))
    tiny = 1e-320
    floor_margin = [report[l]["min_density"] / max(report[l]["floor"], tiny) for l in levels]
    mean_margin = [report[l]["mean_cap"] / max(report[l]["mean"], tiny) for l in levels]
    tail_margin = [
        report[l]["tail_cap"] / max(report[l]["tail"], tiny) if report[l]["tail"] > 0 else np.nan
        for l in levels
    ]
    ax.plot(levels, floor_margin, "o-", label="density floor margin")
    ax.plot(levels, mean_margin, "s-", label="first-moment margin")
    ax.plot(levels, tail_margin, "^-", label="tail-mass margin")
    ax.axhline(1.0, color="k", lw=1)
    ax.set_yscale("log")
    ax.set_xlabel("block level")
    ax.set_ylabel("cap / value (>= 1 passes)")
    ax.legend()
    fig.savefig(path)
    plt.close(fig)


def render_draw_plot(functions, path, grid_size: int = 513) -> None:
    """Sample paths of prior draws (1-d series functions or GP grid draws)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = np.linspace(0.0, 1.0, grid_size)
    for item in functions:
        if isinstance(item, tuple):
            grid, vals = item
            ax.plot(grid, vals, alpha=0.7, lw=1)
        else:
            ax.plot(xs, item(xs), alpha=0.7, lw=1)
    ax.set_xlabel("x")
    ax.set_ylabel("draw")
    fig.savefig(path)
    plt.close(fig)


def render_fit_plot(truth, posterior_mean_fn, data, path, grid_size: int = 513) -> None:
    """Posterior mean against the generating function and the observations."""
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = np.linspace(0.0, 1.0, grid_size)
    if data.n and data.design.p == 1:
        ax.plot(data.design.points, data.responses, ".", color="gray", alpha=0.4, label="data")
    ax.plot(xs, truth(xs), color="black", lw=2, label="truth")
    ax.plot(xs, posterior_mean_fn(xs), color="crimson", lw=2, label="posterior mean")
    ax.set_xlabel("x")
    ax.legend()
    fig.savefig(path)
    plt.close(fig)
