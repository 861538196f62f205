"""Report figures rendered next to the delimited outputs.

Everything draws through the Agg backend so the CLI works headless. Figures
are companions to the CSV/JSON artifacts, not replacements.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_METHOD_STYLE = {
    "decolor": dict(color="tab:red", marker="o"),
    "decolor_gamma0": dict(color="tab:orange", marker="s"),
    "spcp": dict(color="tab:blue", marker="^"),
    "median": dict(color="tab:green", marker="d"),
}


def plot_sweep(rows, path, variable: str = "value") -> None:
    """F-measure and recovery-error curves per method over the sweep grid."""
    methods = sorted({r.method for r in rows})
    fig, (ax_f, ax_r) = plt.subplots(1, 2, figsize=(9.5, 3.6))
    for method in methods:
        got = sorted((r for r in rows if r.method == method),
                     key=lambda r: r.value)
        x = [r.value for r in got]
        style = _METHOD_STYLE.get(method, {})
        ax_f.errorbar(x, [r.f_mean for r in got], yerr=[r.f_std for r in got],
                      label=method, capsize=2, **style)
        ax_r.errorbar(x, [r.rmse_mean for r in got],
                      yerr=[r.rmse_std for r in got], label=method,
                      capsize=2, **style)
    ax_f.set_xlabel(variable)
    ax_f.set_ylabel("F-measure")
    ax_f.set_ylim(0, 1.05)
    ax_f.legend(fontsize=8)
    ax_r.set_xlabel(variable)
    ax_r.set_ylabel("relative recovery error")
    ax_r.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_energy_trace(report, path) -> None:
    """Objective value and penalty schedule over the outer iterations."""
    it = np.arange(1, len(report.energy_trace) + 1)
    fig, (ax_e, ax_p) = plt.subplots(2, 1, figsize=(6.4, 5.2), sharex=True)
    ax_e.plot(it, report.energy_trace, "o-", color="tab:red")
    ax_e.set_ylabel("energy")
    ax_p.semilogy(it, report.alpha_trace, "s-", label="alpha", color="tab:blue")
    ax_p.semilogy(it, report.beta_trace, "^-", label="beta", color="tab:green")
    sig = [s ** 2 for s in report.sigma_trace]
    ax_p.semilogy(it, sig, "d--", label="sigma^2", color="tab:gray")
    ax_p.set_xlabel("outer iteration")
    ax_p.set_ylabel("penalty weights")
    ax_p.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_phase(rows, path) -> None:
    """Heatmap of the accurate-detection fraction over (sigma_f, width)."""
    sig = sorted({r.sigma_f for r in rows})
    wid = sorted({r.width for r in rows})
    grid = np.full((len(sig), len(wid)), np.nan)
    for r in rows:
        grid[sig.index(r.sigma_f), wid.index(r.width)] = r.fraction
    fig, ax = plt.subplots(figsize=(5.2, 4.2))
    im = ax.imshow(grid, origin="lower", aspect="auto", vmin=0, vmax=1,
                   cmap="viridis",
                   extent=(min(wid), max(wid), min(sig), max(sig)))
    ax.set_xlabel("object width")
    ax.set_ylabel("foreground st.dev.")
    fig.colorbar(im, ax=ax, label="fraction of accurate detections")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_segmentation_panels(d, b_hat, s_hat, path) -> None:
    """Observation / background / support panels for 1-D-frame matrices."""
    fig, axes = plt.subplots(1, 3, figsize=(9.5, 3.4))
    for ax, (mat, title) in zip(axes, [(d, "data"), (b_hat, "background"),
                                       (s_hat, "support")]):
        ax.imshow(np.asarray(mat, dtype=float), aspect="auto", cmap="gray")
        ax.set_title(title)
        ax.set_xlabel("frame")
    axes[0].set_ylabel("pixel")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
