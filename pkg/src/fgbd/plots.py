"""Figure rendering for benchmark and diagnostic reports (file output only)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .noise import CHANNEL_NAMES, NoiseEstimate  # noqa: E402

_CHANNEL_COLORS = ("tab:red", "tab:green", "tab:blue")


def plot_bench(rows, path) -> None:
    """Log-log build-time curves for the two graph constructions."""
    ns = [r.n for r in rows]
    fig, (ax, ax2) = plt.subplots(1, 2, figsize=(9, 3.6))
    ax.loglog(ns, [r.slg_s for r in rows], "o-", label="scan-line graph")
    ax.loglog(ns, [r.bf_knn_s for r in rows], "s-", label="brute-force kNN")
    ax.set_xlabel("points")
    ax.set_ylabel("build time [s]")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)

    ax2.semilogx(ns, [r.overlap for r in rows], "d-", color="tab:purple")
    ax2.set_xlabel("points")
    ax2.set_ylabel("kNN edge overlap")
    ax2.set_ylim(0, 1)
    ax2.grid(True, alpha=0.3)

    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_eigen_spectrum(est: NoiseEstimate, path) -> None:
    """Per-channel covariance spectra with the selected tail mean marked."""
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    d = est.eigenvalues.shape[1]
    idx = range(1, d + 1)
    for c, name in enumerate(CHANNEL_NAMES):
        ax.semilogy(idx, est.eigenvalues[c].clip(min=1e-12), "o-",
                    color=_CHANNEL_COLORS[c], label=f"{name} (m={est.m[c]})")
        ax.axhline(max(est.tau[c], 1e-12), color=_CHANNEL_COLORS[c],
                   linestyle=":", alpha=0.6)
    ax.set_xlabel("eigenvalue rank")
    ax.set_ylabel("eigenvalue")
    ax.set_title(f"sigma_est = {est.sigma_est:.3f}")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
