"""Delimited-file formats shared by the CLI stages.

Feature matrix CSV: ``address,<75 canonical feature names>[,label]`` with
rows in sorted-address order and floats written via repr so reruns are
byte-identical and parse back exactly.
"""
from __future__ import annotations

import csv

import numpy as np

from .errors import ArityMismatch, DataError
from .features import FEATURE_NAMES, N_FEATURES


def write_feature_matrix(path, addresses, matrix, truth: dict[str, int] | None = None) -> None:
    """Write one row per address; adds a label column when truth is given."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] != N_FEATURES:
        raise ArityMismatch(f"matrix must be N x {N_FEATURES}, got {matrix.shape}")
    header = ["address", *FEATURE_NAMES] + (["label"] if truth is not None else [])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for addr, row in zip(addresses, matrix):
            cells = [addr, *(repr(float(v)) for v in row)]
            if truth is not None:
                label = truth.get(addr)
                cells.append("" if label is None else str(int(label)))
            writer.writerow(cells)


def read_feature_matrix(path) -> tuple[list[str], np.ndarray, np.ndarray | None]:
    """Returns (addresses, N x 75 matrix, labels or None).

    Label cells may be empty; those rows carry -1 in the label vector so the
    caller can decide whether to drop or fail.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty feature file") from None
        has_label = header and header[-1] == "label"
        expected = ["address", *FEATURE_NAMES] + (["label"] if has_label else [])
        if header != expected:
            raise ArityMismatch(
                f"{path}: header does not match the canonical {N_FEATURES}-feature layout"
            )
        addresses: list[str] = []
        rows: list[list[float]] = []
        labels: list[int] = []
        for cells in reader:
            if not cells:
                continue
            if len(cells) != len(expected):
                raise ArityMismatch(f"{path}: row for {cells[0]!r} has {len(cells)} cells")
            addresses.append(cells[0])
            rows.append([float(v) for v in cells[1 : 1 + N_FEATURES]])
            if has_label:
                raw = cells[-1]
                labels.append(int(raw) if raw != "" else -1)
    matrix = np.array(rows, dtype=np.float64).reshape(len(addresses), N_FEATURES)
    return addresses, matrix, (np.array(labels, dtype=np.int64) if has_label else None)


def read_ground_truth(path) -> dict[str, int]:
    """Read ``address,label[,cluster_id,pattern]`` into address -> 0/1."""
    truth: dict[str, int] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "address" not in reader.fieldnames or "label" not in reader.fieldnames:
            raise DataError(f"{path}: ground-truth header must name address,label")
        for row in reader:
            raw = row["label"].strip().lower()
            if raw in ("sybil", "1"):
                truth[row["address"]] = 1
            elif raw in ("benign", "0"):
                truth[row["address"]] = 0
            else:
                raise DataError(f"{path}: unknown label {row['label']!r} for {row['address']}")
    return truth


def read_cluster_assignments(path) -> dict[str, tuple[str, str]]:
    """Read cluster id and pattern columns from a ground-truth file."""
    out: dict[str, tuple[str, str]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            if row.get("cluster_id"):
                out[row["address"]] = (row["cluster_id"], row.get("pattern", ""))
    return out


def write_scores(path, addresses, scores) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["address", "score"])
        for addr, score in zip(addresses, scores):
            writer.writerow([addr, repr(float(score))])


def read_scores(path) -> dict[str, float]:
    out: dict[str, float] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "address" not in reader.fieldnames or "score" not in reader.fieldnames:
            raise DataError(f"{path}: scores header must name address,score")
        for row in reader:
            out[row["address"]] = float(row["score"])
    return out


def read_address_set(path) -> set[str]:
    """One address per line; blank lines and # comments ignored."""
    out: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                out.add(line)
    return out
