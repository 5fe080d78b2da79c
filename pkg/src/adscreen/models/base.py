"""Shared model types, scoring, and probability mapping.

Probabilities from sigmoid-based models are clipped away from exact 0/1 so
log-losses and calibration groupings stay finite; forest vote fractions
are left untouched (0 and 1 are legitimate vote outcomes).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError

PROB_EPS = 1e-15


def sigmoid(z):
    z = np.clip(z, -500.0, 500.0)
    return 1.0 / (1.0 + np.exp(-z))


def clip_proba(p):
    return np.clip(p, PROB_EPS, 1.0 - PROB_EPS)


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        std = np.where(std < 1e-12, 1.0, std)
        return cls(mean=mean, std=std)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.std


@dataclass
class LinearModel:
    kind: str  # "logistic" | "svm"
    weights: np.ndarray  # on the standardized scale
    bias: float
    scaling: Standardizer | None = None
    platt: tuple[float, float] | None = None  # svm probability map sigma(a*m + b)
    meta: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return len(self.weights)


@dataclass
class StumpEnsemble:
    """Boosted depth-1 stumps: each votes polarity if x[feature] > threshold."""

    stumps: list[tuple[int, float, int, float]]  # (feature, threshold, polarity, alpha)
    n_features: int
    kind: str = "adaboost"
    meta: dict = field(default_factory=dict)


@dataclass
class Tree:
    feature: np.ndarray  # int32, -1 for leaves
    threshold: np.ndarray  # float64
    left: np.ndarray  # int32, self-loop on leaves
    right: np.ndarray
    count0: np.ndarray  # int64 training class counts at the node
    count1: np.ndarray


@dataclass
class Forest:
    trees: list[Tree]
    n_features: int
    max_depth: int
    features_per_split: int
    kind: str = "forest"
    meta: dict = field(default_factory=dict)


def _check_features(X: np.ndarray, n_features: int) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != n_features:
        raise ValueError(f"feature dimension mismatch: got {X.shape[1]}, model has {n_features}")
    if not np.all(np.isfinite(X)):
        raise DataError("non-finite feature values")
    return X


def linear_margin(model: LinearModel, X) -> np.ndarray:
    X = _check_features(X, model.n_features)
    Xs = model.scaling.transform(X) if model.scaling is not None else X
    return Xs @ model.weights + model.bias


def stump_score(model: StumpEnsemble, X) -> np.ndarray:
    X = _check_features(X, model.n_features)
    score = np.zeros(X.shape[0])
    for feature, threshold, polarity, alpha in model.stumps:
        vote = np.where(X[:, feature] > threshold, polarity, -polarity)
        score += alpha * vote
    return score


def tree_apply(tree: Tree, X: np.ndarray) -> np.ndarray:
    """Leaf node index per row (vectorized fixed-point descent)."""
    node = np.zeros(X.shape[0], dtype=np.int32)
    while True:
        feat = tree.feature[node]
        active = feat >= 0
        if not active.any():
            return node
        go_left = np.zeros(len(node), dtype=bool)
        go_left[active] = X[np.flatnonzero(active), feat[active]] <= tree.threshold[node[active]]
        node = np.where(active, np.where(go_left, tree.left[node], tree.right[node]), node)


def forest_votes(model: Forest, X) -> np.ndarray:
    """Fraction of trees voting positive (ties between leaf counts give half a vote)."""
    X = _check_features(X, model.n_features)
    votes = np.zeros(X.shape[0])
    for tree in model.trees:
        leaves = tree_apply(tree, X)
        c0 = tree.count0[leaves]
        c1 = tree.count1[leaves]
        votes += np.where(c1 > c0, 1.0, np.where(c1 == c0, 0.5, 0.0))
    return votes / len(model.trees)


def decision_score(model, X) -> np.ndarray:
    """Ranking score: raw margin for linear models, signed sum for stumps,
    vote fraction for forests. Monotone with predict_proba."""
    if isinstance(model, LinearModel):
        return linear_margin(model, X)
    if isinstance(model, StumpEnsemble):
        return stump_score(model, X)
    if isinstance(model, Forest):
        return forest_votes(model, X)
    raise TypeError(f"unknown model type {type(model).__name__}")


def predict_proba(model, X) -> np.ndarray:
    """Probability of the positive class; classification is proba >= 0.5."""
    if isinstance(model, LinearModel):
        margin = linear_margin(model, X)
        if model.kind == "svm":
            if model.platt is None:
                raise DataError("svm model has no probability calibration")
            a, b = model.platt
            return clip_proba(sigmoid(a * margin + b))
        return clip_proba(sigmoid(margin))
    if isinstance(model, StumpEnsemble):
        return clip_proba(sigmoid(2.0 * stump_score(model, X)))
    if isinstance(model, Forest):
        return forest_votes(model, X)
    raise TypeError(f"unknown model type {type(model).__name__}")
