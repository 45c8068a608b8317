"""Histogram-based gradient-boosted trees, built from first principles.

Design notes that matter for reproducibility and testing:

* Quantile bin edges are computed once from the training matrix.  When a
  feature has no more distinct values than bins, edges are the midpoints
  between consecutive distinct values, so histogram split search is exactly
  equivalent to an exhaustive scan over all thresholds.
* Boosting uses logistic loss with first- and second-order gradient
  statistics; leaf values are the damped Newton step -G / (H + reg_lambda).
* Trees grow depth-wise (level order).  Split search scans features in
  ascending index order and bins left to right, keeping the first strict
  maximum, so ties resolve to the smallest feature index, then the smallest
  bin.  Given identical inputs and config the trained model is byte-identical
  across runs.
* No row or feature sampling; rng_seed rides along in the config echo for
  provenance but nothing here draws from it.
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field, asdict
from typing import Callable, Sequence

import numpy as np

from .errors import ArityMismatch, CorruptModel, DataError, InsufficientSamples, SingleClassInput

MODEL_FORMAT_VERSION = 1


@dataclass
class TrainConfig:
    n_trees: int = 200
    max_depth: int = 6
    learning_rate: float = 0.1
    n_bins: int = 64
    min_samples_leaf: int = 20
    min_gain: float = 0.0
    positive_class_weight: float = 1.0
    reg_lambda: float = 1.0
    rng_seed: int | None = None  # provenance; depth-wise growth draws nothing

    def validate(self) -> None:
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if not (2 <= self.n_bins <= 256):
            raise ValueError("n_bins must be in [2, 256]")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.positive_class_weight <= 0:
            raise ValueError("positive_class_weight must be positive")


@dataclass
class TreeNode:
    """Internal node (feature/threshold/children) or leaf (value)."""

    feature: int | None = None
    threshold: float = 0.0
    missing_goes_left: bool = True
    gain: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"value": self.value}
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "missing_goes_left": self.missing_goes_left,
            "gain": self.gain,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @staticmethod
    def from_dict(data: dict) -> "TreeNode":
        if not isinstance(data, dict):
            raise CorruptModel(f"tree node must be an object, got {type(data).__name__}")
        if "value" in data:
            return TreeNode(value=float(data["value"]))
        try:
            return TreeNode(
                feature=int(data["feature"]),
                threshold=float(data["threshold"]),
                missing_goes_left=bool(data["missing_goes_left"]),
                gain=float(data.get("gain", 0.0)),
                left=TreeNode.from_dict(data["left"]),
                right=TreeNode.from_dict(data["right"]),
            )
        except KeyError as exc:
            raise CorruptModel(f"tree node missing field {exc.args[0]!r}") from exc


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _route_accumulate(node: TreeNode, X: np.ndarray, out: np.ndarray, idx: np.ndarray) -> None:
    if node.is_leaf:
        out[idx] += node.value
        return
    col = X[idx, node.feature]
    go_left = col <= node.threshold
    if node.missing_goes_left:
        go_left |= np.isnan(col)
    _route_accumulate(node.left, X, out, idx[go_left])
    _route_accumulate(node.right, X, out, idx[~go_left])


def _check_matrix(X: np.ndarray, n_features: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != n_features:
        got = X.shape[1] if X.ndim == 2 else f"shape {X.shape}"
        raise ArityMismatch(f"matrix has {got} columns, model expects {n_features}")
    return X


@dataclass
class GbdtModel:
    """Additive ensemble: prediction = sigmoid(base_score + lr * sum(trees))."""

    trees: list[TreeNode]
    learning_rate: float
    base_score: float
    feature_names: list[str]
    bin_edges: list[list[float]]
    config: TrainConfig = field(default_factory=TrainConfig)
    train_loss: list[float] = field(default_factory=list)

    model_type = "gbdt"

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def raw_scores(self, X: np.ndarray) -> np.ndarray:
        X = _check_matrix(X, self.n_features)
        total = np.zeros(len(X), dtype=np.float64)
        idx = np.arange(len(X))
        for tree in self.trees:
            _route_accumulate(tree, X, total, idx)
        return self.base_score + self.learning_rate * total

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return _sigmoid(self.raw_scores(X))


@dataclass
class DecisionTreeModel:
    """Single CART tree; leaf values are class-1 probabilities."""

    trees: list[TreeNode]
    feature_names: list[str]
    bin_edges: list[list[float]]
    config: TrainConfig = field(default_factory=TrainConfig)
    train_loss: list[float] = field(default_factory=list)

    model_type = "decision_tree"
    learning_rate = 1.0
    base_score = 0.0

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = _check_matrix(X, self.n_features)
        out = np.zeros(len(X), dtype=np.float64)
        _route_accumulate(self.trees[0], X, out, np.arange(len(X)))
        return out


def predict(model, feature_vector: Sequence[float]) -> float:
    """Probability for a single vector; pure function of (model, vector)."""
    vec = np.asarray(feature_vector, dtype=np.float64)
    if vec.ndim != 1 or len(vec) != model.n_features:
        raise ArityMismatch(f"vector has shape {vec.shape}, model expects ({model.n_features},)")
    return float(model.predict_proba(vec.reshape(1, -1))[0])


def compute_bin_edges(X: np.ndarray, n_bins: int) -> list[np.ndarray]:
    """Per-feature split boundaries from training data.

    Features with at most n_bins distinct values get midpoint edges (one bin
    per value); denser features get up to n_bins quantile bins, deduplicated.
    """
    edges: list[np.ndarray] = []
    for j in range(X.shape[1]):
        uniq = np.unique(X[:, j])
        if len(uniq) <= 1:
            edges.append(np.empty(0, dtype=np.float64))
        elif len(uniq) <= n_bins:
            edges.append((uniq[:-1] + uniq[1:]) / 2.0)
        else:
            qs = np.quantile(X[:, j], np.linspace(0.0, 1.0, n_bins + 1)[1:-1])
            edges.append(np.unique(qs))
    return edges


def apply_bins(X: np.ndarray, edges: Sequence[np.ndarray]) -> np.ndarray:
    """Map raw values to bin ordinals; value <= edges[b] lands in bin <= b."""
    binned = np.empty(X.shape, dtype=np.int64)
    for j, e in enumerate(edges):
        binned[:, j] = np.searchsorted(e, X[:, j], side="left")
    return binned


def _check_training_inputs(X, y, config: TrainConfig):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2:
        raise ArityMismatch("feature matrix must be 2-dimensional")
    if len(X) != len(y):
        raise ArityMismatch(f"{len(X)} rows but {len(y)} labels")
    if len(X) < 2:
        raise InsufficientSamples(f"need at least 2 rows, got {len(X)}")
    if np.isnan(X).any():
        raise DataError("feature matrix contains NaN; use the -1 sentinel for missing events")
    classes = np.unique(y)
    if not np.all(np.isin(classes, (0.0, 1.0))):
        raise DataError(f"labels must be 0/1, got {classes}")
    if len(classes) < 2:
        raise SingleClassInput("training labels contain a single class")
    config.validate()
    return X, y


class _TreeGrower:
    """Depth-wise growth over binned data, shared by GBDT and CART.

    The two statistics (a, b) are (gradient, hessian) for boosting and
    (weighted positives, weighted total) for Gini.  ``gain_fn`` maps left and
    right cumulative statistics to a gain array; ``accept`` decides whether
    the best gain justifies a split; ``leaf_value`` closes a node.
    """

    def __init__(self, binned: np.ndarray, edges: Sequence[np.ndarray], config: TrainConfig):
        self.binned = binned
        self.edges = edges
        self.config = config
        self.n_features = binned.shape[1]
        self.max_bins = max((len(e) + 1 for e in edges), default=1)
        offsets = np.arange(self.n_features, dtype=np.int64) * self.max_bins
        self.flat = binned + offsets  # row-major (sample, feature) flat bin ids

    def _histograms(self, idx, stat_a, stat_b):
        size = self.n_features * self.max_bins
        flat = self.flat[idx].ravel()
        hist_a = np.bincount(flat, weights=np.repeat(stat_a[idx], self.n_features), minlength=size)
        hist_b = np.bincount(flat, weights=np.repeat(stat_b[idx], self.n_features), minlength=size)
        counts = np.bincount(flat, minlength=size)
        shape = (self.n_features, self.max_bins)
        return hist_a.reshape(shape), hist_b.reshape(shape), counts.reshape(shape)

    def _best_split(self, hist_a, hist_b, counts, gain_fn):
        cfg = self.config
        best = None
        for j in range(self.n_features):
            n_edges = len(self.edges[j])
            if n_edges == 0:
                continue
            al = np.cumsum(hist_a[j])[:n_edges]
            bl = np.cumsum(hist_b[j])[:n_edges]
            cl = np.cumsum(counts[j])[:n_edges]
            a_tot, b_tot, c_tot = hist_a[j].sum(), hist_b[j].sum(), counts[j].sum()
            valid = (cl >= cfg.min_samples_leaf) & ((c_tot - cl) >= cfg.min_samples_leaf)
            if not valid.any():
                continue
            gains = gain_fn(al, bl, a_tot - al, b_tot - bl)
            gains = np.where(valid, gains, -np.inf)
            b = int(np.argmax(gains))
            g = float(gains[b])
            if best is None or g > best[0]:
                best = (g, j, b)
        return best

    def grow(
        self,
        stat_a: np.ndarray,
        stat_b: np.ndarray,
        gain_fn: Callable,
        leaf_value: Callable[[float, float, int], float],
        accept: Callable[[float], bool],
        splittable: Callable[[float, float], bool],
    ) -> tuple[TreeNode, list[tuple[TreeNode, np.ndarray]]]:
        cfg = self.config
        root = TreeNode()
        leaves: list[tuple[TreeNode, np.ndarray]] = []
        frontier = [(root, np.arange(len(self.binned)), 0)]
        while frontier:
            next_frontier = []
            for node, idx, depth in frontier:
                a_tot = float(stat_a[idx].sum())
                b_tot = float(stat_b[idx].sum())
                chosen = None
                if (
                    depth < cfg.max_depth
                    and len(idx) >= 2 * cfg.min_samples_leaf
                    and splittable(a_tot, b_tot)
                ):
                    hists = self._histograms(idx, stat_a, stat_b)
                    found = self._best_split(*hists, gain_fn)
                    if found is not None and accept(found[0]):
                        chosen = found
                if chosen is None:
                    node.feature = None
                    node.value = leaf_value(a_tot, b_tot, len(idx))
                    leaves.append((node, idx))
                    continue
                gain, j, b = chosen
                node.feature = j
                node.threshold = float(self.edges[j][b])
                node.gain = gain
                node.missing_goes_left = True
                node.left = TreeNode()
                node.right = TreeNode()
                go_left = self.binned[idx, j] <= b
                next_frontier.append((node.left, idx[go_left], depth + 1))
                next_frontier.append((node.right, idx[~go_left], depth + 1))
            frontier = next_frontier
        return root, leaves


def train_gbdt(features, labels, config: TrainConfig | None = None) -> GbdtModel:
    """Fit the boosted ensemble; deterministic given (features, labels, config).

    The training log stores the weighted logistic loss before boosting and
    after every iteration; on the training set it comes out non-increasing.
    """
    config = config or TrainConfig()
    X, y = _check_training_inputs(features, labels, config)
    n = len(X)
    w = np.where(y == 1.0, config.positive_class_weight, 1.0)
    w_sum = float(w.sum())
    lam = config.reg_lambda

    edges = compute_bin_edges(X, config.n_bins)
    grower = _TreeGrower(apply_bins(X, edges), edges, config)

    base = math.log(float(np.sum(w * y)) / float(np.sum(w * (1.0 - y))))
    raw = np.full(n, base, dtype=np.float64)

    def logloss(raw_scores) -> float:
        p = np.clip(_sigmoid(raw_scores), 1e-15, 1.0 - 1e-15)
        return float(-np.sum(w * (y * np.log(p) + (1.0 - y) * np.log(1.0 - p))) / w_sum)

    def gain_fn(gl, hl, gr, hr):
        return gl**2 / (hl + lam) + gr**2 / (hr + lam) - (gl + gr) ** 2 / (hl + hr + lam)

    trees: list[TreeNode] = []
    losses = [logloss(raw)]
    for _ in range(config.n_trees):
        p = _sigmoid(raw)
        g = w * (p - y)
        h = w * p * (1.0 - p)
        root, leaves = grower.grow(
            g,
            h,
            gain_fn,
            leaf_value=lambda g_tot, h_tot, count: -g_tot / (h_tot + lam),
            accept=lambda gain: gain > config.min_gain,
            splittable=lambda g_tot, h_tot: True,
        )
        for leaf, idx in leaves:
            raw[idx] += config.learning_rate * leaf.value
        trees.append(root)
        losses.append(logloss(raw))

    return GbdtModel(
        trees=trees,
        learning_rate=config.learning_rate,
        base_score=base,
        feature_names=[f"f{j}" for j in range(X.shape[1])],
        bin_edges=[list(map(float, e)) for e in edges],
        config=config,
        train_loss=losses,
    )


def train_decision_tree(features, labels, config: TrainConfig | None = None) -> DecisionTreeModel:
    """CART baseline: Gini impurity splits over the same histogram binning.

    An impure node splits whenever depth and leaf-size constraints allow,
    taking the largest impurity decrease (>= min_gain, so zero-gain splits of
    impure nodes are permitted); a pure node becomes a leaf immediately.
    Leaf values are weighted positive fractions.
    """
    config = config or TrainConfig()
    X, y = _check_training_inputs(features, labels, config)
    w = np.where(y == 1.0, config.positive_class_weight, 1.0)
    wpos = w * y

    edges = compute_bin_edges(X, config.n_bins)
    grower = _TreeGrower(apply_bins(X, edges), edges, config)

    def gini_sum(pos, total):
        # total * gini(pos/total), safe at total == 0
        safe = np.maximum(total, 1e-300)
        return 2.0 * pos * (total - pos) / safe

    def gain_fn(pl, wl, pr, wr):
        total = wl + wr
        return (gini_sum(pl + pr, total) - gini_sum(pl, wl) - gini_sum(pr, wr)) / total

    root, _ = grower.grow(
        wpos,
        w,
        gain_fn,
        leaf_value=lambda pos, total, count: pos / total if total > 0 else 0.0,
        accept=lambda gain: gain >= config.min_gain,
        splittable=lambda pos, total: 0.0 < pos < total,
    )
    return DecisionTreeModel(
        trees=[root],
        feature_names=[f"f{j}" for j in range(X.shape[1])],
        bin_edges=[list(map(float, e)) for e in edges],
        config=config,
    )


def feature_importance(model) -> list[tuple[str, float]]:
    """Features ranked by total split gain, descending; ties by index.

    Only features that actually split somewhere appear, so a zero-tree model
    ranks nothing and a single stump ranks exactly one feature.
    """
    totals: dict[int, float] = {}

    def walk(node: TreeNode | None):
        if node is None or node.is_leaf:
            return
        totals[node.feature] = totals.get(node.feature, 0.0) + node.gain
        walk(node.left)
        walk(node.right)

    for tree in model.trees:
        walk(tree)
    ranked = sorted(totals.items(), key=lambda kv: (-kv[1], kv[0]))
    return [(model.feature_names[j], gain) for j, gain in ranked]


def save_model(model, sink) -> None:
    """Write the versioned JSON form; load(save(m)) predicts bit-identically."""
    payload = {
        "version": MODEL_FORMAT_VERSION,
        "model_type": model.model_type,
        "config": asdict(model.config),
        "base_score": model.base_score,
        "learning_rate": model.learning_rate,
        "feature_names": model.feature_names,
        "bin_edges": model.bin_edges,
        "train_loss": model.train_loss,
        "trees": [t.to_dict() for t in model.trees],
    }
    own = isinstance(sink, (str, bytes)) or hasattr(sink, "__fspath__")
    fh = open(sink, "w", encoding="utf-8") if own else sink
    try:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")
    finally:
        if own:
            fh.close()


def dumps_model(model) -> str:
    buf = io.StringIO()
    save_model(model, buf)
    return buf.getvalue()


def load_model(source):
    """Parse a model file; raises CorruptModel on any structural problem."""
    own = isinstance(source, (str, bytes)) or hasattr(source, "__fspath__")
    fh = open(source, "r", encoding="utf-8") if own else source
    try:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CorruptModel(f"not valid JSON (truncated file?): {exc.msg}") from exc
    finally:
        if own:
            fh.close()
    if not isinstance(payload, dict):
        raise CorruptModel("model file must contain a JSON object")
    version = payload.get("version")
    if version != MODEL_FORMAT_VERSION:
        raise CorruptModel(
            f"unsupported model version {version!r}, expected {MODEL_FORMAT_VERSION}"
        )
    for field_name in ("model_type", "feature_names", "trees", "bin_edges"):
        if field_name not in payload:
            raise CorruptModel(f"model file missing field {field_name!r}")
    try:
        config = TrainConfig(**payload.get("config", {}))
    except TypeError as exc:
        raise CorruptModel(f"bad config block: {exc}") from exc
    trees = [TreeNode.from_dict(t) for t in payload["trees"]]
    common = dict(
        trees=trees,
        feature_names=list(payload["feature_names"]),
        bin_edges=[list(map(float, e)) for e in payload["bin_edges"]],
        config=config,
        train_loss=[float(x) for x in payload.get("train_loss", [])],
    )
    kind = payload["model_type"]
    if kind == "gbdt":
        try:
            return GbdtModel(
                learning_rate=float(payload["learning_rate"]),
                base_score=float(payload["base_score"]),
                **common,
            )
        except (TypeError, ValueError) as exc:
            raise CorruptModel(f"bad gbdt fields: {exc}") from exc
    if kind == "decision_tree":
        return DecisionTreeModel(**common)
    raise CorruptModel(f"unknown model_type {kind!r}")
