"""Report figures, rendered headlessly to files next to the delimited output."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_importance_chart(ranking, path, top_k: int = 10) -> None:
    """Horizontal bar chart of the top-k features by total split gain."""
    top = ranking[: min(top_k, len(ranking))]
    names = [name for name, _ in top][::-1]
    gains = [gain for _, gain in top][::-1]
    fig, ax = plt.subplots(figsize=(8, max(2.5, 0.45 * len(top) + 1)))
    ax.barh(range(len(top)), gains, color="#3b6ea5")
    ax.set_yticks(range(len(top)))
    ax.set_yticklabels(names, fontsize=9)
    ax.set_xlabel("total split gain")
    ax.set_title(f"Top {len(top)} features by importance")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_roc_curve(scores, labels, auc_value: float, path) -> None:
    """ROC curve with the AUC annotated."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    order = np.argsort(-scores, kind="mergesort")
    sorted_labels = labels[order]
    tps = np.cumsum(sorted_labels == 1)
    fps = np.cumsum(sorted_labels == 0)
    n_pos = max(int((labels == 1).sum()), 1)
    n_neg = max(int((labels == 0).sum()), 1)
    tpr = np.concatenate([[0.0], tps / n_pos])
    fpr = np.concatenate([[0.0], fps / n_neg])
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(fpr, tpr, color="#a53b3b", lw=1.5, label=f"AUC = {auc_value:.4f}")
    ax.plot([0, 1], [0, 1], ls="--", color="grey", lw=0.8)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_title("ROC, held-out split")
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_score_histogram(scores, labels, path) -> None:
    """Score distributions for the two classes."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    fig, ax = plt.subplots(figsize=(6, 4))
    bins = np.linspace(0.0, 1.0, 41)
    ax.hist(scores[labels == 0], bins=bins, alpha=0.6, label="benign", color="#3b6ea5")
    ax.hist(scores[labels == 1], bins=bins, alpha=0.6, label="sybil", color="#a53b3b")
    ax.set_xlabel("score")
    ax.set_ylabel("addresses")
    ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
