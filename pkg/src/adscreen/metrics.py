"""Evaluation metrics: confusion counts, per-class P/R/F1, accuracy,
ROC AUC, PR AUC, and the Hosmer-Lemeshow calibration test.

ROC AUC is computed as the rank statistic P(score_pos > score_neg) with
half credit for ties, which equals the trapezoidal area under the ROC
curve. PR AUC is average precision with step interpolation (trapezoidal
interpolation in PR space overstates the area, so it is not used).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaincc

from .errors import DegenerateGroupsError, MetricUndefinedError


def confusion(scores, labels, threshold: float = 0.5) -> tuple[int, int, int, int]:
    """(TP, FP, TN, FN) at a threshold; predicted positive iff score >= threshold."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.size == 0:
        raise ValueError("empty input")
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    pred = scores >= threshold
    pos = labels == 1
    tp = int(np.sum(pred & pos))
    fp = int(np.sum(pred & ~pos))
    tn = int(np.sum(~pred & ~pos))
    fn = int(np.sum(~pred & pos))
    return tp, fp, tn, fn


def prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """Precision, recall, F1 with the 0/0 -> 0 convention."""
    if tp < 0 or fp < 0 or fn < 0:
        raise ValueError("negative counts")
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def roc_auc(scores, labels) -> float:
    """Mann-Whitney form: P(s+ > s-) + 0.5 P(s+ = s-) via averaged rank sums."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise MetricUndefinedError("ROC AUC needs both classes present")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # average 1-based rank over the tie block
        i = j + 1
    rank_sum_pos = float(np.sum(ranks[labels == 1]))
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def pr_auc(scores, labels) -> float:
    """Average precision: sum over threshold steps of precision x recall gain."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n_pos = int(np.sum(labels == 1))
    if n_pos == 0:
        raise MetricUndefinedError("PR AUC needs at least one positive")
    order = np.argsort(-scores, kind="stable")
    y = (labels[order] == 1).astype(np.int64)
    s = scores[order]
    # walk distinct score levels so ties form one operating point
    boundaries = np.flatnonzero(np.diff(s)) + 1
    cut_ends = np.concatenate([boundaries, [len(s)]])
    tp = np.cumsum(y)[cut_ends - 1]
    ranks = cut_ends
    precision = tp / ranks
    recall = tp / n_pos
    prev_recall = np.concatenate([[0.0], recall[:-1]])
    return float(np.sum((recall - prev_recall) * precision))


def chi_square_sf(x: float, df: int) -> float:
    """Upper-tail chi-square probability: regularized incomplete gamma Q(df/2, x/2)."""
    if x < 0:
        raise ValueError("chi-square statistic must be nonnegative")
    if df < 1:
        raise ValueError("df must be >= 1")
    return float(gammaincc(df / 2.0, x / 2.0))


@dataclass
class CalibrationGroup:
    n: int
    mean_prob: float
    observed_rate: float
    expected_positives: float
    observed_positives: int


def hosmer_lemeshow(probs, labels, n_groups: int = 5):
    """Hosmer-Lemeshow statistic and p-value over probability quantile groups.

    Rows are stably sorted by predicted probability and cut into n_groups
    near-equal groups; identical probabilities never straddle a boundary
    (boundaries shift forward over ties). Statistic:
    sum over groups of (O - E)^2 / (E (1 - E/n)); p-value from chi-square
    with n_groups - 2 degrees of freedom. Returns (statistic, p_value,
    [CalibrationGroup...]) for the calibration table.
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    n = len(probs)
    if n_groups < 2:
        raise ValueError("n_groups must be >= 2")
    if n < n_groups:
        raise DegenerateGroupsError("fewer rows than groups")
    order = np.argsort(probs, kind="stable")
    p_sorted = probs[order]
    y_sorted = (labels[order] == 1).astype(np.float64)

    boundaries = []
    prev = 0
    for g in range(1, n_groups):
        b = round(n * g / n_groups)
        b = max(b, prev + 1)
        while b < n and p_sorted[b] == p_sorted[b - 1]:
            b += 1
        if b >= n:
            break
        boundaries.append(b)
        prev = b
    edges = [0] + boundaries + [n]
    if len(edges) - 1 < n_groups:
        raise DegenerateGroupsError(
            f"ties collapse the quantile groups ({len(edges) - 1} of {n_groups} formable)"
        )

    stat = 0.0
    groups: list[CalibrationGroup] = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        n_g = hi - lo
        e_g = float(np.sum(p_sorted[lo:hi]))
        o_g = float(np.sum(y_sorted[lo:hi]))
        denom = e_g * (1.0 - e_g / n_g)
        if denom <= 0.0:
            raise DegenerateGroupsError("group expected count is 0 or n; statistic undefined")
        stat += (o_g - e_g) ** 2 / denom
        groups.append(
            CalibrationGroup(
                n=n_g,
                mean_prob=e_g / n_g,
                observed_rate=o_g / n_g,
                expected_positives=e_g,
                observed_positives=int(o_g),
            )
        )
    if n_groups == 2:  # df = 0: the null distribution is a point mass at 0
        p_value = 1.0 if stat < 1e-12 else 0.0
    else:
        p_value = chi_square_sf(stat, n_groups - 2)
    return stat, p_value, groups


@dataclass
class EvalReport:
    """Everything reported per (model, setting, clean window, subgroup) cell."""

    precision_case: float
    recall_case: float
    f1_case: float
    precision_ctrl: float
    recall_ctrl: float
    f1_ctrl: float
    accuracy: float
    roc_auc: float
    pr_auc: float
    hl_statistic: float | None
    hl_p_value: float | None
    n: int
    n_positive: int
    threshold: float = 0.5
    calibration: list = field(default_factory=list)


def evaluate_scores(probs, ranking_scores, labels, threshold: float = 0.5,
                    hl_groups: int = 5, with_calibration: bool = True) -> EvalReport:
    """Full report: thresholded metrics on probabilities, ranking metrics on
    raw scores, calibration on probabilities (None when degenerate)."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    tp, fp, tn, fn = confusion(probs, labels, threshold)
    p_case, r_case, f_case = prf(tp, fp, fn)
    p_ctrl, r_ctrl, f_ctrl = prf(tn, fn, fp)
    hl_stat = hl_p = None
    calibration: list = []
    if with_calibration:
        try:
            hl_stat, hl_p, calibration = hosmer_lemeshow(probs, labels, hl_groups)
        except MetricUndefinedError:
            pass
    return EvalReport(
        precision_case=p_case,
        recall_case=r_case,
        f1_case=f_case,
        precision_ctrl=p_ctrl,
        recall_ctrl=r_ctrl,
        f1_ctrl=f_ctrl,
        accuracy=(tp + tn) / len(labels),
        roc_auc=roc_auc(ranking_scores, labels),
        pr_auc=pr_auc(ranking_scores, labels),
        hl_statistic=hl_stat,
        hl_p_value=hl_p,
        n=len(labels),
        n_positive=int(np.sum(labels == 1)),
        threshold=threshold,
        calibration=calibration,
    )
