"""Random forest of Gini-impurity binary trees on bootstrap samples.

Each node draws a fresh random feature subset, scans every boundary
between distinct sorted values with prefix sums, and splits where the
weighted child impurity is lowest. Nodes stop at max depth, purity, or
when no candidate boundary improves impurity. Per-tree RNG streams derive
from (seed, tree index), so forests are reproducible and trees could be
fit independently.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import DataError
from .base import Forest, Tree


class _TreeGrower:
    def __init__(self, X, y, max_depth, features_per_split, rng):
        self.X = X
        self.y = y
        self.max_depth = max_depth
        self.m = features_per_split
        self.rng = rng
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.count0: list[int] = []
        self.count1: list[int] = []

    def _new_node(self, idx) -> int:
        node = len(self.feature)
        n1 = int(self.y[idx].sum())
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(node)
        self.right.append(node)
        self.count0.append(len(idx) - n1)
        self.count1.append(n1)
        return node

    def grow(self, idx, depth) -> int:
        node = self._new_node(idx)
        n = len(idx)
        n1 = self.count1[node]
        if depth >= self.max_depth or n < 2 or n1 == 0 or n1 == n:
            return node
        feats = self.rng.choice(self.X.shape[1], size=self.m, replace=False)
        best_gain = 1e-12
        best = None  # (feature, threshold)
        parent_gini = 2.0 * (n1 / n) * (1.0 - n1 / n)
        for f in feats:
            xs = self.X[idx, f]
            order = np.argsort(xs, kind="stable")
            x_sorted = xs[order]
            y_sorted = self.y[idx][order]
            boundaries = np.flatnonzero(x_sorted[1:] != x_sorted[:-1]) + 1
            if len(boundaries) == 0:
                continue
            pos_prefix = np.cumsum(y_sorted)
            nl = boundaries.astype(np.float64)
            nr = n - nl
            pl = pos_prefix[boundaries - 1] / nl
            pr = (n1 - pos_prefix[boundaries - 1]) / nr
            weighted = (nl * 2.0 * pl * (1.0 - pl) + nr * 2.0 * pr * (1.0 - pr)) / n
            j = int(np.argmin(weighted))
            gain = parent_gini - float(weighted[j])
            if gain > best_gain:
                best_gain = gain
                b = boundaries[j]
                best = (int(f), 0.5 * (float(x_sorted[b - 1]) + float(x_sorted[b])))
        if best is None:
            return node
        f, thr = best
        go_left = self.X[idx, f] <= thr
        self.feature[node] = f
        self.threshold[node] = thr
        self.left[node] = self.grow(idx[go_left], depth + 1)
        self.right[node] = self.grow(idx[~go_left], depth + 1)
        return node

    def finish(self) -> Tree:
        return Tree(
            feature=np.asarray(self.feature, dtype=np.int32),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int32),
            right=np.asarray(self.right, dtype=np.int32),
            count0=np.asarray(self.count0, dtype=np.int64),
            count1=np.asarray(self.count1, dtype=np.int64),
        )


def train_rf(
    X,
    y,
    n_trees: int = 200,
    max_depth: int = 12,
    features_per_split: int | None = None,
    seed: int = 0,
    bootstrap: bool = True,
) -> Forest:
    X = np.asarray(X, dtype=np.float64)
    y01 = np.asarray(y, dtype=np.int64).ravel()
    if X.ndim != 2 or X.shape[0] != len(y01):
        raise DataError("X must be 2-D with one row per label")
    if not np.all(np.isfinite(X)):
        raise DataError("non-finite feature values")
    if not set(np.unique(y01)) <= {0, 1}:
        raise DataError("labels must be 0/1")
    if n_trees < 1:
        raise DataError("n_trees must be >= 1")
    if max_depth < 0:
        raise DataError("max_depth must be >= 0")
    n, k = X.shape
    m = features_per_split if features_per_split is not None else max(1, math.ceil(math.sqrt(k)))
    m = min(m, k)

    trees: list[Tree] = []
    for t in range(n_trees):
        rng = np.random.default_rng(np.random.SeedSequence([seed, t]))
        idx = rng.integers(0, n, n) if bootstrap else np.arange(n)
        grower = _TreeGrower(X, y01, max_depth, m, rng)
        grower.grow(np.asarray(idx), 0)
        trees.append(grower.finish())
    return Forest(
        trees=trees,
        n_features=k,
        max_depth=max_depth,
        features_per_split=m,
        meta={"n_trees": n_trees, "bootstrap": bootstrap, "seed": seed},
    )
