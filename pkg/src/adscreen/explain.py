"""Shapley-value predictor attribution.

For linear scores with independent features the Shapley value has the
closed form phi_j = w_j (x_j - background_j) on the margin (pre-sigmoid)
scale; that is what linear_shap computes, with the model's stored
standardization folded into effective per-feature weights. The
exponential-time exact_shap_bruteforce implements the subset-enumeration
definition for any score function and serves as the validation oracle.

Stored base values are defined as score(x) - sum(phi), so the efficiency
identity sum(phi) + base = score(x) holds to within one floating-point
rounding; for a linear model the base equals the background score up to
the same precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .features import PairVocabulary
from .lexicon import Lexicon
from .models.base import LinearModel, linear_margin


@dataclass
class Attribution:
    per_feature: np.ndarray  # phi, margin scale
    base_value: float
    grouped: dict = field(default_factory=dict)  # group -> summed |phi|
    by_age_decade: dict = field(default_factory=dict)  # decade -> summed |phi|


def linear_shap(model: LinearModel, x, background_mean) -> Attribution:
    """Exact Shapley attribution of a linear model's margin at x.

    `background_mean` is the training-set feature mean on the original
    (pre-standardization) scale.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    background = np.asarray(background_mean, dtype=np.float64).ravel()
    if x.shape != (model.n_features,) or background.shape != (model.n_features,):
        raise ValueError("dimension mismatch between x, background and model")
    if model.scaling is not None:
        effective_w = model.weights / model.scaling.std
    else:
        effective_w = model.weights
    phi = effective_w * (x - background)
    score_x = float(linear_margin(model, x[None, :])[0])
    # base is the score residual, so sum(phi) + base recovers score(x) to
    # within one rounding of the addition (bit-exactness is not generally
    # representable in IEEE arithmetic)
    base = score_x - float(phi.sum())
    return Attribution(per_feature=phi, base_value=base)


def exact_shap_bruteforce(score_fn, x, background, max_features: int = 12) -> np.ndarray:
    """Subset-enumeration Shapley values of score_fn at x vs a background.

    phi_j = sum over subsets S not containing j of
    |S|! (K-|S|-1)! / K! * [f(S + j) - f(S)], where f(S) evaluates score_fn
    on a point taking x on S and the background elsewhere. Exponential in
    the number of features; refuses more than max_features.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    background = np.asarray(background, dtype=np.float64).ravel()
    k = len(x)
    if k > max_features:
        raise ValueError(f"brute-force Shapley limited to {max_features} features, got {k}")
    kfact = math.factorial(k)
    subset_weight = [math.factorial(s) * math.factorial(k - s - 1) / kfact for s in range(k)]

    values = np.empty(1 << k)
    for mask in range(1 << k):
        point = background.copy()
        for j in range(k):
            if mask >> j & 1:
                point[j] = x[j]
        values[mask] = float(score_fn(point))

    phi = np.zeros(k)
    for j in range(k):
        bit = 1 << j
        for mask in range(1 << k):
            if mask & bit:
                continue
            s = bin(mask).count("1")
            phi[j] += subset_weight[s] * (values[mask | bit] - values[mask])
    return phi


AGE_BANDS = (("le60", 0, 60), ("60s", 61, 70), ("70s", 71, 80), ("ge80", 81, 200))


def band_of_age(age: int) -> str:
    for name, lo, hi in AGE_BANDS:
        if lo <= age <= hi:
            return name
    return AGE_BANDS[-1][0]


@dataclass
class ImportanceTable:
    feature_rows: list  # (keyword, age, group, mean_abs_phi, rank)
    group_rows: list  # (band, group, mean_abs_phi, rank); band "all" = whole test set
    keyword_rows: list  # (keyword, mean_abs_phi, rank)


def group_importance(
    attributions: list[Attribution],
    vocab: PairVocabulary,
    lexicon: Lexicon,
    patient_ages: list[int] | None = None,
) -> ImportanceTable:
    """Aggregate |phi| over a test set: per pair, per keyword, per lexicon
    group, and per patient-age band (band of the patient's age at their
    index year)."""
    if not attributions:
        raise ValueError("no attributions to aggregate")
    phi = np.vstack([np.abs(a.per_feature) for a in attributions])
    mean_abs = phi.mean(axis=0)

    order = np.argsort(-mean_abs, kind="stable")
    feature_rows = []
    for rank, col in enumerate(order.tolist(), 1):
        kw, age = vocab.pairs[col]
        feature_rows.append((kw, age, lexicon.group_of(kw), float(mean_abs[col]), rank))

    kw_totals: dict[str, float] = {}
    for col, (kw, _age) in enumerate(vocab.pairs):
        kw_totals[kw] = kw_totals.get(kw, 0.0) + float(mean_abs[col])
    keyword_rows = [
        (kw, total, rank)
        for rank, (kw, total) in enumerate(
            sorted(kw_totals.items(), key=lambda kv: (-kv[1], kv[0])), 1
        )
    ]

    def group_rows_for(matrix: np.ndarray, band: str) -> list:
        means = matrix.mean(axis=0)
        totals: dict[str, float] = {}
        for col, (kw, _age) in enumerate(vocab.pairs):
            g = lexicon.group_of(kw)
            totals[g] = totals.get(g, 0.0) + float(means[col])
        ranked = sorted(totals.items(), key=lambda kv: (-kv[1], kv[0]))
        return [(band, g, v, rank) for rank, (g, v) in enumerate(ranked, 1)]

    group_rows = group_rows_for(phi, "all")
    if patient_ages is not None:
        if len(patient_ages) != len(attributions):
            raise ValueError("patient_ages must align with attributions")
        bands = np.array([band_of_age(a) for a in patient_ages])
        for band, _, _ in AGE_BANDS:
            mask = bands == band
            if mask.any():
                group_rows.extend(group_rows_for(phi[mask], band))
    return ImportanceTable(feature_rows=feature_rows, group_rows=group_rows, keyword_rows=keyword_rows)
