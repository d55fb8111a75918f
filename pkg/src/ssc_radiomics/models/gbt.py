"""
Gradient-boosted regression trees for class-weighted logistic loss.

Every stage fits a depth-limited regression tree to the pseudo-residuals
``y - p`` by weighted least squares (exact greedy splits over sorted feature
values).  Leaf values are the minimizer of the quadratic upper bound of the
logistic loss on that leaf: the curvature of the loss never exceeds 1/4, so
the step ``4 * sum(w*r) / sum(w)`` cannot increase the leaf's loss for any
learning rate up to 2.  With full-data stages the weighted training loss is
therefore non-increasing from tree to tree.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .common import (SCHEMA_VERSION, ClassWeights, check_xy, clip_proba, sigmoid,
                     weighted_cross_entropy)

_MIN_GAIN = 1e-12


@dataclass(frozen=True)
class GbtConfig:
    n_trees: int = 100
    max_depth: int = 3
    learning_rate: float = 0.1
    bag_fraction: float = 1.0
    min_leaf: int = 3
    seed: int = 0

    def validate(self):
        if self.n_trees < 1:
            raise ValueError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1, got {self.max_depth}")
        if not 0 < self.bag_fraction <= 1:
            raise ValueError(f"bag_fraction must lie in (0, 1], got {self.bag_fraction}")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")


@dataclass(frozen=True, eq=False)
class Tree:
    """Flat node arrays; ``feature == -1`` marks a leaf. ``value`` already includes the learning rate."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.intp)
        while True:
            feat = self.feature[node]
            internal = feat >= 0
            if not internal.any():
                return self.value[node]
            rows = np.flatnonzero(internal)
            go_left = X[rows, feat[rows]] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])

    def to_dict(self) -> dict:
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "value": self.value.tolist()}

    @classmethod
    def from_dict(cls, d) -> "Tree":
        return cls(np.asarray(d["feature"], dtype=np.intp), np.asarray(d["threshold"], dtype=np.float64),
                   np.asarray(d["left"], dtype=np.intp), np.asarray(d["right"], dtype=np.intp),
                   np.asarray(d["value"], dtype=np.float64))


@dataclass(frozen=True, eq=False)
class GbtModel:
    trees: tuple
    learning_rate: float
    base_score: float
    n_features: int
    config: GbtConfig = field(default_factory=GbtConfig)

    kind = "gbt"

    def staged_decision(self, X):
        """Yield logits after 0, 1, ..., n_trees stages."""
        X = self._check(X)
        z = np.full(X.shape[0], self.base_score)
        yield z.copy()
        for t in self.trees:
            z = z + t.predict(X)
            yield z.copy()

    def decision_function(self, X) -> np.ndarray:
        X = self._check(X)
        z = np.full(X.shape[0], self.base_score)
        for t in self.trees:
            z = z + t.predict(X)
        return z

    def predict_proba(self, X) -> np.ndarray:
        return clip_proba(sigmoid(self.decision_function(X)))

    def _check(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got shape {X.shape}")
        return X

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "kind": self.kind,
                "learning_rate": self.learning_rate, "base_score": self.base_score,
                "n_features": self.n_features, "config": asdict(self.config),
                "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d) -> "GbtModel":
        return cls(tuple(Tree.from_dict(t) for t in d["trees"]), float(d["learning_rate"]),
                   float(d["base_score"]), int(d["n_features"]), GbtConfig(**d["config"]))


def _best_split(X, r, w, min_leaf):
    """Best (gain, feature, threshold) for weighted least squares on residuals ``r``."""
    n = X.shape[0]
    if n < 2 * min_leaf:
        return None
    order = np.argsort(X, axis=0, kind="stable")
    xs = np.take_along_axis(X, order, axis=0)
    wr = (w * r)[order]
    ww = w[order]
    s_left = np.cumsum(wr, axis=0)[:-1]
    w_left = np.cumsum(ww, axis=0)[:-1]
    s_tot = float(np.sum(w * r))
    w_tot = float(np.sum(w))
    s_right = s_tot - s_left
    w_right = w_tot - w_left
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = s_left ** 2 / w_left + s_right ** 2 / w_right - s_tot ** 2 / w_tot
    k = np.arange(1, n)[:, None]
    valid = (xs[:-1] < xs[1:]) & (k >= min_leaf) & (n - k >= min_leaf) & (w_left > 0) & (w_right > 0)
    gain = np.where(valid, gain, -np.inf)
    pos, feat = np.unravel_index(int(np.argmax(gain)), gain.shape)
    best = gain[pos, feat]
    if not np.isfinite(best) or best <= _MIN_GAIN:
        return None
    lo, hi = xs[pos, feat], xs[pos + 1, feat]
    thr = 0.5 * (lo + hi)
    if not lo <= thr < hi:
        thr = lo
    return float(best), int(feat), float(thr)


def _leaf_value(r, w, lr):
    return lr * 4.0 * float(np.sum(w * r)) / float(np.sum(w))


def _grow_tree(X, r, w, cfg: GbtConfig) -> Tree:
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        for arr in (feature, left, right):
            arr.append(-1)
        threshold.append(0.0)
        value.append(0.0)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(X.shape[0]), 0)]
    while stack:
        node, rows, depth = stack.pop()
        split = None
        if depth < cfg.max_depth:
            split = _best_split(X[rows], r[rows], w[rows], cfg.min_leaf)
        if split is None:
            value[node] = _leaf_value(r[rows], w[rows], cfg.learning_rate)
            continue
        _, f, thr = split
        go_left = X[rows, f] <= thr
        lnode, rnode = new_node(), new_node()
        feature[node], threshold[node] = f, thr
        left[node], right[node] = lnode, rnode
        # LIFO: the left child is expanded first
        stack.append((rnode, rows[~go_left], depth + 1))
        stack.append((lnode, rows[go_left], depth + 1))
    return Tree(np.asarray(feature, dtype=np.intp), np.asarray(threshold),
                np.asarray(left, dtype=np.intp), np.asarray(right, dtype=np.intp),
                np.asarray(value))


def train_gbt(X, y, weights: ClassWeights | None = None, config: GbtConfig | None = None) -> GbtModel:
    """Stagewise boosting; ``bag_fraction`` rows are drawn without replacement per tree."""
    config = config or GbtConfig()
    config.validate()
    X, y = check_xy(X, y)
    weights = weights or ClassWeights.uniform()
    sw = weights.sample_weights(y)
    base = float(np.log(np.sum(sw * y) / np.sum(sw * (1 - y))))

    n = X.shape[0]
    n_bag = max(1, int(round(config.bag_fraction * n)))
    rng = np.random.default_rng(config.seed)
    z = np.full(n, base)
    trees = []
    for _ in range(config.n_trees):
        r = y - sigmoid(z)
        if n_bag < n:
            rows = np.sort(rng.choice(n, size=n_bag, replace=False))
        else:
            rows = np.arange(n)
        tree = _grow_tree(X[rows], r[rows], sw[rows], config)
        trees.append(tree)
        z = z + tree.predict(X)
    return GbtModel(tuple(trees), config.learning_rate, base, X.shape[1], config)


def staged_training_loss(model: GbtModel, X, y, weights: ClassWeights | None = None) -> np.ndarray:
    weights = weights or ClassWeights.uniform()
    sw = weights.sample_weights(np.asarray(y))
    return np.array([weighted_cross_entropy(z, y, sw) for z in model.staged_decision(X)])
