"""Classification metrics and the held-out split.

The AUC here is the rank-statistic form: sum the average-rank positions of
the positives and subtract the minimum possible rank mass.  Tie groups
contribute exact half-integer ranks, so the result matches the quadratic
pairwise definition (ties credited 0.5) bit for bit, which the test suite
checks against a brute-force oracle.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ClassTooSmall, EmptyDataset, SingleClassDataset
from .rng import substream


@dataclass(frozen=True)
class ScoredRow:
    address: str
    score: float
    label: int


@dataclass
class ScoredDataset:
    """Rows of (address, score in [0,1], binary label)."""

    rows: list[ScoredRow]

    def __post_init__(self):
        if not self.rows:
            raise EmptyDataset("scored dataset has no rows")
        for r in self.rows:
            if not (0.0 <= r.score <= 1.0):
                raise ValueError(f"score out of [0,1] for {r.address}: {r.score}")
            if r.label not in (0, 1):
                raise ValueError(f"label must be 0/1 for {r.address}: {r.label}")

    @classmethod
    def from_arrays(cls, addresses, scores, labels) -> "ScoredDataset":
        return cls([ScoredRow(a, float(s), int(l)) for a, s, l in zip(addresses, scores, labels)])

    @property
    def scores(self) -> np.ndarray:
        return np.array([r.score for r in self.rows], dtype=np.float64)

    @property
    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.rows], dtype=np.int64)


@dataclass(frozen=True)
class MetricsReport:
    threshold: float
    tp: int
    fp: int
    tn: int
    fn: int
    precision: float
    recall: float
    f1: float
    auc: float | None = None

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "tp": self.tp,
            "fp": self.fp,
            "tn": self.tn,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "auc": self.auc,
        }


def confusion_metrics(data: ScoredDataset, threshold: float) -> MetricsReport:
    """Counts and P/R/F1 at a threshold; predicted positive iff score >= it.

    Zero-denominator conventions: precision is 0 with no predicted positives,
    recall is 0 with no actual positives, F1 is 0 when P + R is 0.
    """
    if not (0.0 <= threshold <= 1.0):
        raise ValueError(f"threshold must be in [0,1], got {threshold}")
    scores = data.scores
    labels = data.labels
    predicted = scores >= threshold
    actual = labels == 1
    tp = int(np.sum(predicted & actual))
    fp = int(np.sum(predicted & ~actual))
    fn = int(np.sum(~predicted & actual))
    tn = int(np.sum(~predicted & ~actual))
    precision = tp / (tp + fp) if (tp + fp) > 0 else 0.0
    recall = tp / (tp + fn) if (tp + fn) > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) > 0 else 0.0
    return MetricsReport(
        threshold=threshold, tp=tp, fp=fp, tn=tn, fn=fn,
        precision=precision, recall=recall, f1=f1,
    )


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing the mean rank of their group."""
    _, inverse, counts = np.unique(values, return_inverse=True, return_counts=True)
    ends = np.cumsum(counts)
    starts = ends - counts
    group_rank = (starts + 1 + ends) / 2.0  # exact half-integers
    return group_rank[inverse]


def auc(data: ScoredDataset) -> float:
    """Probability that a random positive outscores a random negative.

    Ties count one half.  O(N log N) via average ranks; exactly equal to the
    O(N^2) pairwise count.
    """
    labels = data.labels
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassDataset("AUC needs at least one positive and one negative")
    ranks = _average_ranks(data.scores)
    rank_sum = float(ranks[labels == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def evaluate(data: ScoredDataset, threshold: float = 0.5) -> MetricsReport:
    """Confusion metrics plus AUC in one report."""
    report = confusion_metrics(data, threshold)
    return MetricsReport(**{**report.to_dict(), "auc": auc(data)})


def best_f1_threshold(data: ScoredDataset) -> tuple[float, float]:
    """(threshold, f1) maximizing F1 over the observed score values."""
    best = (0.5, -1.0)
    for t in sorted(set(r.score for r in data.rows)):
        f1 = confusion_metrics(data, t).f1
        if f1 > best[1]:
            best = (t, f1)
    return best


def stratified_split(
    addresses: Sequence[str],
    labels: Sequence[int],
    test_fraction: float,
    seed: int,
) -> tuple[list[str], list[str]]:
    """Deterministic class-proportional split into (train, test) addresses.

    Proportions hold within one sample per class; the result depends only on
    the address/label CONTENT and the seed, not on input order.  Every class
    must be able to put at least one sample on each side.
    """
    if not (0.0 < test_fraction < 1.0):
        raise ValueError(f"test_fraction must be in (0,1), got {test_fraction}")
    if len(addresses) != len(labels):
        raise ValueError("addresses and labels length mismatch")
    by_class: dict[int, list[str]] = {}
    for addr, label in zip(addresses, labels):
        by_class.setdefault(int(label), []).append(addr)

    rng = substream(seed, "stratified-split")
    train: list[str] = []
    test: list[str] = []
    for label in sorted(by_class):
        members = sorted(by_class[label])
        if len(members) < 2:
            raise ClassTooSmall(
                f"class {label} has {len(members)} sample(s), cannot appear in both splits"
            )
        n_test = round(len(members) * test_fraction)
        n_test = min(max(n_test, 1), len(members) - 1)
        rng.shuffle(members)
        test.extend(members[:n_test])
        train.extend(members[n_test:])
    return sorted(train), sorted(test)


def metrics_table(rows: Sequence[tuple[str, MetricsReport]]) -> str:
    """Aligned text table: Method, Precision, Recall, F1, AUC."""
    header = ("Method", "Precision", "Recall", "F1", "AUC")
    lines = [f"{header[0]:<24} {header[1]:>9} {header[2]:>9} {header[3]:>9} {header[4]:>9}"]
    for name, rep in rows:
        auc_text = f"{rep.auc:.4f}" if rep.auc is not None else "n/a"
        lines.append(
            f"{name:<24} {rep.precision:>9.4f} {rep.recall:>9.4f} {rep.f1:>9.4f} {auc_text:>9}"
        )
    return "\n".join(lines)
