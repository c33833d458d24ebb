"""Matplotlib renderings that accompany the delimited outputs.

Every report path writes the raw CSV first and then a figure next to it;
figures are presentation sugar, the CSVs are the data of record.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def heatmap_figure(grid: np.ndarray, path, title: str = "") -> None:
    """Colormapped activation map with a colorbar."""
    fig, ax = plt.subplots(figsize=(5, 4.2))
    im = ax.imshow(grid, cmap="jet", vmin=0.0, vmax=1.0, interpolation="nearest")
    ax.set_xlabel("column")
    ax.set_ylabel("row")
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def similarity_matrix_figure(matrix: np.ndarray, labels, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(matrix, cmap="viridis", vmin=0.0, vmax=1.0)
    ticks = range(len(labels))
    ax.set_xticks(ticks, labels, rotation=90, fontsize=7)
    ax.set_yticks(ticks, labels, fontsize=7)
    ax.set_title("mean pairwise heatmap SSIM")
    fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def confusion_figure(confusion: np.ndarray, labels, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(confusion, cmap="Blues")
    ticks = range(len(labels))
    ax.set_xticks(ticks, labels, rotation=90, fontsize=7)
    ax.set_yticks(ticks, labels, fontsize=7)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    for i in range(confusion.shape[0]):
        for j in range(confusion.shape[1]):
            if confusion[i, j]:
                ax.text(j, i, str(int(confusion[i, j])), ha="center", va="center",
                        fontsize=6,
                        color="white" if confusion[i, j] > confusion.max() / 2 else "black")
    fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def robustness_figure(rows, path) -> None:
    """Horizontal bars of per-obfuscator macro-F1 (0..1)."""
    names = [r[0] for r in rows]
    values = [r[1] for r in rows]
    fig, ax = plt.subplots(figsize=(7, 0.38 * len(rows) + 1.2))
    ypos = np.arange(len(rows))
    ax.barh(ypos, values, color="#35628f")
    ax.set_yticks(ypos, names, fontsize=8)
    ax.invert_yaxis()
    ax.set_xlim(0.0, 1.0)
    ax.set_xlabel("macro F1 on obfuscated samples")
    for y, v in zip(ypos, values):
        ax.text(min(v + 0.01, 0.97), y, f"{v:.3f}", va="center", fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def loss_curve_figure(losses, path, title: str = "training loss") -> None:
    fig, ax = plt.subplots(figsize=(5.5, 3.2))
    ax.plot(range(1, len(losses) + 1), losses, marker="o", markersize=3)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean per-view loss")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
