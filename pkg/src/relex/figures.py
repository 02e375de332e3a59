"""Matplotlib renderings saved next to the delimited/JSON outputs.

Everything draws on the Agg backend and writes PNG files; nothing here is
needed for training or scoring, so callers can skip it wholesale.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_selfattn_heatmaps(path, tokens, head_matrices, title_prefix="head") -> None:
    """One panel per attention head, token-labelled axes."""
    n_heads = len(head_matrices)
    fig, axes = plt.subplots(1, n_heads, figsize=(4.2 * n_heads, 4.0), squeeze=False)
    for idx, matrix in enumerate(head_matrices):
        ax = axes[0][idx]
        im = ax.imshow(np.asarray(matrix), cmap="viridis", aspect="auto", vmin=0.0)
        ax.set_title(f"{title_prefix} {idx}")
        ax.set_xticks(range(len(tokens)))
        ax.set_xticklabels(tokens, rotation=90, fontsize=7)
        ax.set_yticks(range(len(tokens)))
        ax.set_yticklabels(tokens, fontsize=7)
        fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_alpha_strip(path, tokens, alpha, e1, e2) -> None:
    """Single-row heat strip of pooling weights; entity tokens are marked."""
    alpha = np.asarray(alpha)
    fig, ax = plt.subplots(figsize=(max(4.0, 0.5 * len(tokens)), 1.8))
    ax.imshow(alpha[None, :], cmap="YlOrRd", aspect="auto", vmin=0.0)
    labels = [
        f"[{tok}]" if i in (e1, e2) else tok for i, tok in enumerate(tokens)
    ]
    ax.set_xticks(range(len(tokens)))
    ax.set_xticklabels(labels, rotation=90, fontsize=7)
    ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_training_curves(path, report_dict) -> None:
    """Loss and dev-F1 curves over epochs from a TrainReport dict."""
    epochs = report_dict.get("epochs", [])
    if not epochs:
        return
    xs = [e["epoch"] for e in epochs]
    losses = [e["train_loss"] for e in epochs]
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.plot(xs, losses, marker="o", markersize=3, label="train loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss per example")
    dev = [(e["epoch"], e["dev_f1"]) for e in epochs if e.get("dev_f1") is not None]
    if dev:
        ax2 = ax.twinx()
        ax2.plot(*zip(*dev), color="tab:green", marker="s", markersize=3, label="dev macro-F1")
        ax2.set_ylabel("dev macro-F1")
        ax2.set_ylim(0.0, 1.0)
    best = report_dict.get("best_epoch")
    if best is not None:
        ax.axvline(best, color="grey", linestyle="--", linewidth=0.8)
    fig.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_family_f1_bars(path, per_family) -> None:
    """Horizontal P/R/F1 bars per relation family from a score report."""
    families = list(per_family)
    ys = np.arange(len(families))
    width = 0.27
    fig, ax = plt.subplots(figsize=(7.0, 0.45 * len(families) + 1.5))
    for offset, key, color in ((-width, "P", "tab:blue"), (0.0, "R", "tab:orange"), (width, "F1", "tab:green")):
        ax.barh(ys + offset, [per_family[f][key] for f in families], height=width,
                color=color, label=key)
    ax.set_yticks(ys)
    ax.set_yticklabels(families, fontsize=8)
    ax.set_xlim(0.0, 1.0)
    ax.invert_yaxis()
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
