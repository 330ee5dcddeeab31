"""Static SVG figures. Output is byte-stable for identical inputs (fixed hash salt, no date)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .residuals import TERMS  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "colloid-sb"

LABELS = {"L_psi": r"$L_\psi$ (HJB)", "L_rho": r"$L_\rho$ (FPK)", "L_pi": r"$L_\pi$ (policy)",
          "L_rho0": r"$L_{\rho_0}$", "L_rhoT": r"$L_{\rho_T}$"}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def residual_curves(path, epochs, terms: dict, target=None):
    fig, ax = plt.subplots(figsize=(7, 4))
    for k in TERMS:
        ax.semilogy(epochs, terms[k], label=LABELS[k], lw=1)
    if target:
        ax.axhline(target, color="k", ls="--", lw=0.8)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean squared residual")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def field_heatmap(path, x, t, values, label):
    fig, ax = plt.subplots(figsize=(6, 4))
    mesh = ax.pcolormesh(t, x, values, shading="auto", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label=label)
    ax.set_xlabel("t [s]")
    ax.set_ylabel(r"$\langle C_6 \rangle$")
    fig.tight_layout()
    _save(fig, path)


def density_snapshots(path, x, snaps, kde_x=None, kde_snaps=None):
    """``snaps``: list of (t, density on x); optional KDE stems at ``kde_x``."""
    n = len(snaps)
    fig, axes = plt.subplots(n, 1, figsize=(6, 1.6 * n), sharex=True)
    axes = np.atleast_1d(axes)
    for i, (t, rho) in enumerate(snaps):
        ax = axes[i]
        ax.fill_between(x, rho, color="0.8")
        ax.plot(x, rho, "k", lw=1)
        if kde_snaps is not None:
            ax.stem(kde_x, kde_snaps[i], linefmt="C0-", markerfmt="C0.", basefmt=" ")
        ax.set_ylabel(f"t={t:g}s", fontsize=8)
    axes[-1].set_xlabel(r"$\langle C_6 \rangle$")
    fig.tight_layout()
    _save(fig, path)


def sample_paths(path, times, states, controls, max_paths=200):
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(10, 4))
    k = min(max_paths, states.shape[0])
    a1.plot(times, states[:k].T, lw=0.3, alpha=0.5)
    a1.set_xlabel("t [s]")
    a1.set_ylabel(r"$\langle C_6 \rangle$")
    a2.plot(times, controls[:k].T, lw=0.3, alpha=0.5)
    a2.set_xlabel("t [s]")
    a2.set_ylabel("u")
    fig.tight_layout()
    _save(fig, path)
