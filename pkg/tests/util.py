"""Independent reference implementations used as test oracles.

These deliberately avoid the library's own code paths: the scan oracle is a
per-keyword find() loop, the AUC oracles enumerate pairs / walk ranks, and
the chi-square oracle sums the incomplete-gamma series directly.
"""

import math

import numpy as np


def _is_word_byte(b: int) -> bool:
    return (48 <= b <= 57) or (65 <= b <= 90) or (97 <= b <= 122) or b >= 128


def naive_find(keywords, text):
    """Boundary-aware per-keyword scan; returns sorted (kw_index, byte_start)."""
    data = text.lower().encode("utf-8")
    hits = []
    for ki, kw in enumerate(keywords):
        pat = kw.encode("utf-8")
        start = 0
        while True:
            i = data.find(pat, start)
            if i < 0:
                break
            before_ok = i == 0 or not _is_word_byte(data[i - 1])
            j = i + len(pat)
            after_ok = j == len(data) or not _is_word_byte(data[j])
            if before_ok and after_ok:
                hits.append((ki, i))
            start = i + 1
    return sorted(hits)


def auc_all_pairs(scores, labels):
    """ROC AUC by brute force over every positive/negative pair."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def average_precision_rank_walk(scores, labels):
    """AP by walking the descending ranking one distinct score at a time."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    n_pos = int(np.sum(labels == 1))
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    ap = 0.0
    tp = 0
    seen = 0
    prev_recall = 0.0
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and s[j + 1] == s[i]:
            j += 1
        tp += int(np.sum(y[i : j + 1] == 1))
        seen = j + 1
        recall = tp / n_pos
        precision = tp / seen
        ap += (recall - prev_recall) * precision
        prev_recall = recall
        i = j + 1
    return ap


def chi_square_sf_series(x: float, df: int, terms: int = 500) -> float:
    """Upper chi-square tail via the lower incomplete gamma power series:
    P(a, z) = z^a e^-z / Gamma(a+1) * sum_k z^k / ((a+1)...(a+k)); Q = 1 - P."""
    a = df / 2.0
    z = x / 2.0
    if z == 0.0:
        return 1.0
    total = 1.0
    term = 1.0
    denom = a
    for _ in range(terms):
        denom += 1.0
        term *= z / denom
        total += term
        if term < 1e-18 * total:
            break
    log_p = a * math.log(z) - z - math.lgamma(a + 1.0) + math.log(total)
    return 1.0 - math.exp(log_p)


def central_difference_gradient(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    g = np.zeros_like(x)
    for i in range(len(x)):
        step = h * max(1.0, abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += step
        xm[i] -= step
        g[i] = (f(xp) - f(xm)) / (2 * step)
    return g
