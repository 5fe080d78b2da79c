"""Linear classifiers: L2-regularized logistic regression trained by
full-batch accelerated gradient descent, and a linear SVM trained by the
Pegasos stochastic subgradient method with iterate averaging.

Both are deterministic given their seed, standardize features internally
(statistics stored on the model and replayed at predict time), and leave
the bias unregularized.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import DataError
from .base import LinearModel, Standardizer, sigmoid


def lr_objective(weights, bias, X, y, l2_lambda):
    """Mean binary cross-entropy + (l2/2)||w||^2 (bias excluded)."""
    z = X @ weights + bias
    # ln(1 + e^z) - y z, stable for large |z|
    return float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2_lambda * np.dot(weights, weights))


def lr_gradient(weights, bias, X, y, l2_lambda):
    """Analytic gradient of lr_objective wrt (weights, bias)."""
    n = X.shape[0]
    residual = (sigmoid(X @ weights + bias) - y) / n
    grad_w = X.T @ residual + l2_lambda * weights
    grad_b = float(residual.sum())
    return grad_w, grad_b


def _validate_xy(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] != len(y):
        raise DataError("X must be 2-D with one row per label")
    if not np.all(np.isfinite(X)):
        raise DataError("non-finite feature values")
    if not np.all(np.isfinite(y)):
        raise DataError("non-finite labels")
    return X, y


def train_lr(
    X,
    y,
    l2_lambda: float = 1e-4,
    max_iters: int = 300,
    tol: float = 1e-6,
    seed: int = 0,
    standardize: bool = True,
) -> LinearModel:
    """Fit logistic regression with Nesterov-accelerated descent.

    Backtracking line search keeps every accepted step a descent step; a
    function-value restart drops the momentum whenever it would increase
    the objective. Stops when the gradient max-norm falls below tol;
    hitting max_iters flags meta["converged"] = False instead of raising.
    """
    X, y = _validate_xy(X, y)
    if not set(np.unique(y)) <= {0.0, 1.0}:
        raise DataError("labels must be 0/1")
    scaling = Standardizer.fit(X) if standardize else None
    Xs = scaling.transform(X) if scaling is not None else X

    n, k = Xs.shape
    w = np.zeros(k)
    b = 0.0
    vw, vb = w.copy(), b
    t_momentum = 1.0
    step = 1.0
    prev_loss = lr_objective(w, b, Xs, y, l2_lambda)
    converged = False
    grad_inf = math.inf
    iterations = 0

    for iterations in range(1, max_iters + 1):
        gw, gb = lr_gradient(vw, vb, Xs, y, l2_lambda)
        grad_inf = max(float(np.max(np.abs(gw))), abs(gb))
        if grad_inf < tol:
            w, b = vw, vb
            converged = True
            break
        loss_v = lr_objective(vw, vb, Xs, y, l2_lambda)
        g_sq = float(np.dot(gw, gw)) + gb * gb
        while True:
            w_new = vw - step * gw
            b_new = vb - step * gb
            loss_new = lr_objective(w_new, b_new, Xs, y, l2_lambda)
            if loss_new <= loss_v - 0.5 * step * g_sq or step < 1e-16:
                break
            step *= 0.5
        if loss_new > prev_loss:  # momentum overshot: drop it and retry from the last iterate
            vw, vb = w.copy(), b
            t_momentum = 1.0
            continue
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_momentum * t_momentum))
        beta = (t_momentum - 1.0) / t_next
        vw = w_new + beta * (w_new - w)
        vb = b_new + beta * (b_new - b)
        t_momentum = t_next
        w, b = w_new, b_new
        prev_loss = loss_new
        step *= 1.5

    return LinearModel(
        kind="logistic",
        weights=w,
        bias=float(b),
        scaling=scaling,
        meta={
            "converged": converged,
            "iterations": iterations,
            "final_grad_max": grad_inf,
            "l2_lambda": l2_lambda,
        },
    )


def platt_fit(margins: np.ndarray, y01: np.ndarray, max_iters: int = 100) -> tuple[float, float]:
    """Fit sigma(a*m + b) to labels by Newton steps on the regularized
    log-likelihood (targets softened by the class-count prior so perfectly
    separated margins cannot push the parameters to infinity)."""
    n_pos = float(np.sum(y01 == 1))
    n_neg = float(np.sum(y01 == 0))
    t = np.where(y01 == 1, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
    a, b = 1.0, 0.0
    for _ in range(max_iters):
        p = sigmoid(a * margins + b)
        g_a = float(np.sum((p - t) * margins))
        g_b = float(np.sum(p - t))
        w = p * (1.0 - p)
        h_aa = float(np.sum(w * margins * margins)) + 1e-12
        h_ab = float(np.sum(w * margins))
        h_bb = float(np.sum(w)) + 1e-12
        det = h_aa * h_bb - h_ab * h_ab
        if abs(det) < 1e-300:
            break
        da = (h_bb * g_a - h_ab * g_b) / det
        db = (h_aa * g_b - h_ab * g_a) / det
        a -= da
        b -= db
        if abs(da) < 1e-10 and abs(db) < 1e-10:
            break
    return float(a), float(b)


def train_svm(
    X,
    y,
    reg_lambda: float = 1e-4,
    epochs: int = 20,
    seed: int = 0,
    standardize: bool = True,
) -> LinearModel:
    """Pegasos-style hinge-loss minimization with per-epoch shuffling and
    running iterate averaging; the averaged weights are the model. A Platt
    sigmoid fitted on the training margins provides probabilities; ranking
    metrics use the raw margin, so calibration cannot change orderings.
    """
    X, y = _validate_xy(X, y)
    classes = set(np.unique(y))
    if classes <= {0.0, 1.0}:
        y_pm = np.where(y == 1.0, 1.0, -1.0)
    elif classes <= {-1.0, 1.0}:
        y_pm = y.copy()
    else:
        raise DataError("labels must be 0/1 or -1/+1")
    scaling = Standardizer.fit(X) if standardize else None
    Xs = scaling.transform(X) if scaling is not None else X

    n, k = Xs.shape
    rng = np.random.default_rng(seed)
    w = np.zeros(k)
    b = 0.0
    w_avg = np.zeros(k)
    b_avg = 0.0
    t = 0
    objective_path = []
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (reg_lambda * t)
            xi = Xs[i]
            margin = y_pm[i] * (float(xi @ w) + b)
            w *= 1.0 - eta * reg_lambda
            if margin < 1.0:
                w += (eta * y_pm[i]) * xi
                b += eta * y_pm[i]
            w_avg += (w - w_avg) / t
            b_avg += (b - b_avg) / t
        hinge = np.maximum(0.0, 1.0 - y_pm * (Xs @ w_avg + b_avg)).mean()
        objective_path.append(float(hinge + 0.5 * reg_lambda * np.dot(w_avg, w_avg)))

    margins = Xs @ w_avg + b_avg
    platt = platt_fit(margins, (y_pm > 0).astype(np.float64))
    return LinearModel(
        kind="svm",
        weights=w_avg,
        bias=float(b_avg),
        scaling=scaling,
        platt=platt,
        meta={"objective_path": objective_path, "reg_lambda": reg_lambda, "epochs": epochs},
    )
