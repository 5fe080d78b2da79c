"""Discrete AdaBoost over depth-1 decision stumps.

The stump search presorts every feature once, then evaluates every
(feature, threshold, polarity) candidate per round with prefix sums over
the sorted sample weights. A stump votes +polarity when the feature value
exceeds its threshold. Rounds stop early when the best achievable weighted
error reaches 0.5 (no edge left) and a perfect stump receives a capped
alpha instead of an infinite one.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import DataError
from .base import StumpEnsemble

ALPHA_CAP_EPS = 1e-8  # perfect stump treated as error = eps
FEATURE_BLOCK = 256  # presorted columns processed per chunk to bound temporaries


def train_adaboost(X, y, n_rounds: int = 200) -> StumpEnsemble:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] != len(y):
        raise DataError("X must be 2-D with one row per label")
    if not np.all(np.isfinite(X)):
        raise DataError("non-finite feature values")
    classes = set(np.unique(y))
    if classes <= {0.0, 1.0}:
        y = np.where(y == 1.0, 1.0, -1.0)
    elif not classes <= {-1.0, 1.0}:
        raise DataError("labels must be 0/1 or -1/+1")
    if len(set(np.unique(y))) < 2:
        raise DataError("training needs both classes")
    if n_rounds < 1:
        raise DataError("n_rounds must be >= 1")

    n, k = X.shape
    order = np.argsort(X, axis=0, kind="stable")
    x_sorted = np.take_along_axis(X, order, axis=0)
    y_sorted = np.take_along_axis(y[:, None], order, axis=0)
    # thresholds are valid between strictly increasing neighbours; the
    # "split below everything" candidate (constant stump) is always valid
    splittable = np.vstack([np.ones((1, k), dtype=bool), x_sorted[1:] != x_sorted[:-1]])

    weights = np.full(n, 1.0 / n)
    stumps: list[tuple[int, float, int, float]] = []
    exp_loss_path: list[float] = []
    round_errors: list[float] = []
    score = np.zeros(n)

    for _ in range(n_rounds):
        best = None  # (error, feature, split_row, polarity)
        for start in range(0, k, FEATURE_BLOCK):
            cols = slice(start, min(start + FEATURE_BLOCK, k))
            w_sorted = np.take_along_axis(weights[:, None], order[:, cols], axis=0)
            wy_pos = np.where(y_sorted[:, cols] > 0, w_sorted, 0.0)
            wy_neg = w_sorted - wy_pos
            total_neg = wy_neg.sum(axis=0)
            # error of "predict +1 above the split at row i" = pos weight at
            # or below i plus neg weight above i; row -1 (constant +1 stump)
            # gives total negative weight
            cum_pos = np.cumsum(wy_pos, axis=0)
            cum_neg = np.cumsum(wy_neg, axis=0)
            err_plus = np.vstack([total_neg[None, :], cum_pos[:-1] + (total_neg - cum_neg[:-1])])
            err_plus = np.where(splittable[:, cols], err_plus, 0.5)
            err_minus = 1.0 - err_plus
            for err_mat, polarity in ((err_plus, 1), (err_minus, -1)):
                row, col = np.unravel_index(np.argmin(err_mat), err_mat.shape)
                err = float(err_mat[row, col])
                if best is None or err < best[0]:
                    best = (err, start + col, int(row), polarity)
        err, feature, row, polarity = best
        if err >= 0.5:
            break
        if row == 0:
            threshold = float(x_sorted[0, feature]) - 1.0
        else:
            threshold = 0.5 * (float(x_sorted[row - 1, feature]) + float(x_sorted[row, feature]))
        eps = max(err, ALPHA_CAP_EPS)
        alpha = 0.5 * math.log((1.0 - eps) / eps)
        stumps.append((int(feature), threshold, polarity, alpha))
        round_errors.append(err)

        vote = np.where(X[:, feature] > threshold, polarity, -polarity)
        score += alpha * vote
        weights = np.exp(-y * score)
        exp_loss_path.append(float(weights.mean()))
        weights /= weights.sum()
        if err <= ALPHA_CAP_EPS:
            break

    if not stumps:
        raise DataError("no stump beat chance on round 1")
    return StumpEnsemble(
        stumps=stumps,
        n_features=k,
        meta={
            "exp_loss_path": exp_loss_path,
            "round_errors": round_errors,
            "requested_rounds": n_rounds,
        },
    )
