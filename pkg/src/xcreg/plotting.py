"""Figure rendering for register and experiment reports (PNG via the Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.dpi": 100,
    "savefig.dpi": 120,
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.2,
}
# PNG metadata carries the matplotlib version by default; drop it for reproducible bytes
_SAVE_META = {"Software": None}
LINESTYLES = ["-", "--", "-.", ":"]


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata=_SAVE_META)
    plt.close(fig)


def plot_alignment(grid, values, aligned_grid, aligned_values, names, path, subjects=3):
    """Unaligned vs aligned component curves for the first few subjects."""
    subjects = min(subjects, values.shape[0])
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(subjects, 2, figsize=(7, 2.2 * subjects), squeeze=False, sharey="row")
        for i in range(subjects):
            for j, name in enumerate(names):
                ls = LINESTYLES[j % len(LINESTYLES)]
                axes[i, 0].plot(grid, values[i, j], ls, label=name)
                axes[i, 1].plot(aligned_grid, aligned_values[i, j], ls, label=name)
            axes[i, 0].set_ylabel(f"subject {i + 1}")
        axes[0, 0].set_title("before registration")
        axes[0, 1].set_title("after registration")
        axes[-1, 0].set_xlabel("t")
        axes[-1, 1].set_xlabel("t")
        axes[0, 1].legend(frameon=False)
        _save(fig, path)


def plot_xd_density(x, density, path):
    """Kernel density of XD(0) - XD(theta_hat) with the no-change line."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3))
        ax.plot(x, density, "k-")
        ax.axvline(0.0, color="0.4", ls="--")
        ax.set_xlabel("decrease in total cross-component distance")
        ax.set_ylabel("density")
        _save(fig, path)


def plot_criterion_traces(pairwise, names, path):
    """Coarse-scan criterion curves with the selected minimizer marked."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3.2))
        for s in pairwise:
            tr = np.array(sorted(s.search_trace))
            ax.plot(tr[:, 0], tr[:, 1], label=f"{names[s.j]}-{names[s.k]}")
            ax.plot([s.tau_hat], [s.criterion_at_min], "k.", ms=4)
        ax.set_xlabel("tau")
        ax.set_ylabel("L_n(tau)")
        ax.legend(frameon=False, ncol=2)
        _save(fig, path)


def plot_imse_table(table, path):
    """Mean percent IMSE decrease against sigma2_eta, one line per sigma2_zeta."""
    header, rows = table[0], table[1:]
    etas = [float(h.split("=")[1]) for h in header[1:]]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3))
        for r, row in enumerate(rows):
            ax.plot(etas, row[1:], LINESTYLES[r % 4] + "o", ms=3, label=f"sigma2_zeta={row[0]:g}")
        ax.set_xscale("log")
        ax.set_xlabel("sigma2_eta")
        ax.set_ylabel("mean % IMSE decrease")
        ax.legend(frameon=False)
        _save(fig, path)


def plot_rates(n_list, tau_rmse, theta_rmse, path):
    """Log-log RMSE against n with a reference slope of -1/2."""
    n = np.asarray(n_list, dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        for j, col in enumerate(np.asarray(theta_rmse).T):
            ax.loglog(n, col, "o-", ms=3, label=f"theta_{j + 1}")
        ax.loglog(n, np.asarray(tau_rmse), "ks--", ms=3, label="tau_12")
        ref = np.asarray(tau_rmse)[0] * np.sqrt(n[0] / n)
        ax.loglog(n, ref, color="0.6", lw=0.8, label="n^-1/2")
        ax.set_xlabel("n")
        ax.set_ylabel("RMSE")
        ax.legend(frameon=False, ncol=2)
        _save(fig, path)
