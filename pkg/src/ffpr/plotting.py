"""
Matplotlib figures written next to the CSV outputs of the CLI.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "image.cmap": "gray",
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}

REFERENCE_SA_MSE_TRAIN = 0.0449
REFERENCE_SA_MSE_TEST = 0.0441


def _save(fig, path):
    fig.savefig(path)
    plt.close(fig)
    return path


def reconstruction_gallery(truths, recons, measurements, path, max_items=6):
    """Rows of |truth|, phase(truth), |recon|, phase(recon), Y^(1/4)."""
    k = min(max_items, len(truths))
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(k, 5, figsize=(7.5, 1.5 * k), squeeze=False)
        titles = ["|x|", "arg x", "|recon|", "arg recon", "Y^(1/4)"]
        for i in range(k):
            x, r = truths[i], recons[i]
            panels = [
                (np.abs(x), None),
                (np.where(np.abs(x) > 0, np.angle(x), np.nan), "twilight"),
                (np.abs(r), None),
                (np.where(np.abs(r) > 1e-3 * np.abs(r).max(), np.angle(r), np.nan), "twilight"),
                (np.fft.fftshift(measurements[i]) ** 0.25 if measurements[i] is not None else np.zeros((2, 2)), "viridis"),
            ]
            for j, (img, cmap) in enumerate(panels):
                ax = axes[i, j]
                kw = {"vmin": -np.pi, "vmax": np.pi} if cmap == "twilight" else {}
                ax.imshow(img, cmap=cmap, interpolation="nearest", **kw)
                ax.set_xticks([])
                ax.set_yticks([])
                if i == 0:
                    ax.set_title(titles[j])
        fig.tight_layout()
        return _save(fig, path)


def metric_histogram(values, path, label="relative SA-MSE"):
    values = np.asarray(values, float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 2.8))
        ax.hist(values, bins=min(30, max(5, len(values) // 2)), color="0.4")
        ax.axvline(np.median(values), color="C3", lw=1, label=f"median {np.median(values):.4f}")
        ax.axvline(REFERENCE_SA_MSE_TEST, color="C0", lw=1, ls="--", label=f"reference {REFERENCE_SA_MSE_TEST}")
        ax.set_xlabel(label)
        ax.set_ylabel("records")
        ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path)


def residual_curves(histories, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 2.8))
        for h in histories:
            ax.semilogy(h, lw=0.6, alpha=0.6)
        ax.set_xlabel("iteration")
        ax.set_ylabel("magnitude residual")
        fig.tight_layout()
        return _save(fig, path)


def sqrt_curve(grid_rows, path, train=None, title=None):
    """Prediction vs. reference over y, with the training pairs scattered behind."""
    rows = np.asarray(grid_rows, float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 3.0))
        if train is not None:
            ty, tt = train
            step = max(1, len(ty) // 2000)
            ax.scatter(ty[::step], tt[::step], s=1, color="0.7", label="training pairs")
        ax.plot(rows[:, 0], rows[:, 2], "k--", lw=1, label="sqrt(y)")
        ax.plot(rows[:, 0], -rows[:, 2], "k--", lw=1)
        ax.plot(rows[:, 0], rows[:, 1], color="C3", lw=1.5, label="MLP")
        ax.set_xlabel("y")
        ax.set_ylabel("prediction")
        if title:
            ax.set_title(title)
        ax.legend(frameon=False, loc="lower left")
        fig.tight_layout()
        return _save(fig, path)


def loss_curve(curve, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 2.8))
        ax.semilogy(np.arange(1, len(curve) + 1), curve, color="C0")
        ax.set_xlabel("epoch")
        ax.set_ylabel("training MSE")
        fig.tight_layout()
        return _save(fig, path)
