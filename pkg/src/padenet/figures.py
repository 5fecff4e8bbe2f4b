"""Report figures rendered to files next to the delimited output: confusion
matrix heatmaps and training history curves."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .pipeline import CLASS_CODES


def plot_confusion(cm: np.ndarray, path, title: str = "Confusion matrix", codes=CLASS_CODES):
    cm = np.asarray(cm)
    n = cm.shape[0]
    fig, ax = plt.subplots(figsize=(6.0, 5.2))
    im = ax.imshow(cm, cmap="Blues")
    ax.set_xticks(range(n), codes[:n])
    ax.set_yticks(range(n), codes[:n])
    ax.set_xlabel("Predicted class")
    ax.set_ylabel("True class")
    ax.set_title(title)
    vmax = cm.max() if cm.max() > 0 else 1
    for i in range(n):
        for j in range(n):
            ax.text(
                j,
                i,
                str(int(cm[i, j])),
                ha="center",
                va="center",
                fontsize=8,
                color="white" if cm[i, j] > 0.6 * vmax else "black",
            )
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def plot_history(history, path, title: str = "Training history"):
    """Loss curves and validation accuracy per epoch on twin panels."""
    epochs = [r.epoch for r in history]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.6))
    ax1.plot(epochs, [r.train_loss for r in history], label="train loss")
    ax1.plot(epochs, [r.val_loss for r in history], label="val loss")
    ax1.set_xlabel("Epoch")
    ax1.set_ylabel("Loss")
    ax1.legend()
    ax1.set_title(title)
    ax2.plot(epochs, [100.0 * r.val_acc for r in history], color="tab:green")
    ax2.set_xlabel("Epoch")
    ax2.set_ylabel("Validation accuracy (%)")
    ax2.set_ylim(0, 101)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path
