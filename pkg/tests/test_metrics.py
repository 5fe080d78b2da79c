import math

import numpy as np
import pytest

from adscreen.errors import DegenerateGroupsError, MetricUndefinedError
from adscreen.metrics import (
    chi_square_sf,
    confusion,
    evaluate_scores,
    hosmer_lemeshow,
    pr_auc,
    prf,
    roc_auc,
)

from .util import auc_all_pairs, average_precision_rank_walk, chi_square_sf_series


class TestConfusion:
    def test_basic(self):
        assert confusion([0.9, 0.1], [1, 0]) == (1, 0, 1, 0)

    def test_threshold_inclusive(self):
        # score exactly at the threshold counts as a positive call
        assert confusion([0.5], [0]) == (0, 1, 0, 0)

    def test_all_zero_scores(self):
        tp, fp, tn, fn = confusion([0.0, 0.0, 0.0], [1, 1, 0])
        assert tp == 0 and fn == 2 and tn == 1

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            confusion([], [])


class TestPRF:
    def test_table_style_row(self):
        p, r, f = prf(87, 0, 13)
        assert (p, r) == (1.0, 0.87)
        assert f == pytest.approx(2 * 0.87 / 1.87)
        assert round(f, 2) == 0.93

    def test_zero_conventions(self):
        assert prf(0, 0, 0) == (0.0, 0.0, 0.0)

    def test_balanced(self):
        assert prf(1, 1, 1) == (0.5, 0.5, 0.5)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            prf(-1, 0, 0)


class TestRocAuc:
    def test_perfect_separation(self):
        assert roc_auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0

    def test_pure_tie(self):
        assert roc_auc([0.5, 0.5], [1, 0]) == 0.5

    def test_three_wins_one_loss(self):
        # brute force: pos {0.8, 0.4}, neg {0.6, 0.2}: wins 0.8>0.6, 0.8>0.2,
        # 0.4>0.2; loss 0.4<0.6 -> 3/4
        scores, labels = [0.8, 0.4, 0.6, 0.2], [1, 1, 0, 0]
        assert auc_all_pairs(scores, labels) == 0.75
        assert roc_auc(scores, labels) == 0.75

    def test_interleaved_is_perfect(self):
        # positives hold the top two scores here, so every pair wins
        scores, labels = [0.8, 0.4, 0.6, 0.2], [1, 0, 1, 0]
        assert auc_all_pairs(scores, labels) == 1.0
        assert roc_auc(scores, labels) == 1.0

    def test_matches_brute_force_exactly(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            n = int(rng.integers(2, 50))
            labels = np.zeros(n, dtype=int)
            labels[: max(1, int(rng.integers(1, n)))] = 1
            rng.shuffle(labels)
            if labels.sum() in (0, n):
                labels[0] = 1 - labels[0]
            scores = np.round(rng.random(n), 2)  # induce ties
            assert roc_auc(scores, labels) == auc_all_pairs(scores, labels)

    def test_complement_identity(self):
        rng = np.random.default_rng(6)
        scores = rng.permutation(20) / 20.0  # tie-free
        labels = (rng.random(20) < 0.4).astype(int)
        labels[0], labels[1] = 1, 0
        assert roc_auc(scores, labels) == pytest.approx(1.0 - roc_auc(-scores, labels))

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(7)
        scores = rng.normal(size=30)
        labels = (rng.random(30) < 0.5).astype(int)
        labels[0], labels[1] = 1, 0
        assert roc_auc(scores, labels) == pytest.approx(roc_auc(np.exp(scores), labels))

    def test_single_class_undefined(self):
        with pytest.raises(MetricUndefinedError):
            roc_auc([0.1, 0.2], [1, 1])


class TestPrAuc:
    def test_perfect_ranking(self):
        assert pr_auc([0.9, 0.8, 0.1], [1, 1, 0]) == 1.0

    def test_all_tied_equals_prevalence(self):
        assert pr_auc([0.5] * 10, [1, 1, 1, 0, 0, 0, 0, 0, 0, 0]) == pytest.approx(0.3)

    def test_hand_walked_example(self):
        # rank walk: positive at rank 1 (P=1, dR=1/2) then at rank 3 (P=2/3, dR=1/2)
        assert pr_auc([0.9, 0.7, 0.5], [1, 0, 1]) == pytest.approx(0.5 + 0.5 * 2 / 3)

    def test_matches_rank_walk_oracle(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            n = int(rng.integers(2, 60))
            labels = (rng.random(n) < 0.3).astype(int)
            labels[int(rng.integers(0, n))] = 1
            scores = np.round(rng.random(n), 2)
            assert pr_auc(scores, labels) == pytest.approx(
                average_precision_rank_walk(scores, labels), abs=1e-12
            )

    def test_no_positives_undefined(self):
        with pytest.raises(MetricUndefinedError):
            pr_auc([0.5, 0.6], [0, 0])


class TestChiSquareSf:
    def test_at_zero(self):
        for df in (1, 2, 5, 10):
            assert chi_square_sf(0.0, df) == 1.0

    def test_df2_closed_form(self):
        for x in (0.5, 1.0, 3.0, 10.0):
            assert chi_square_sf(x, 2) == pytest.approx(math.exp(-x / 2), rel=1e-12)

    def test_classic_critical_value(self):
        assert chi_square_sf(7.815, 3) == pytest.approx(0.05, abs=5e-4)

    def test_matches_series_oracle(self):
        for x in (0.1, 1.0, 2.5, 7.815, 15.0, 30.0):
            for df in (1, 2, 3, 5, 8):
                assert chi_square_sf(x, df) == pytest.approx(
                    chi_square_sf_series(x, df), abs=1e-8
                )

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            chi_square_sf(-1.0, 3)


class TestHosmerLemeshow:
    def test_perfectly_calibrated(self):
        # five prob levels, each group's observed rate equals its probability
        probs, labels = [], []
        for p, n in ((0.1, 20), (0.2, 20), (0.3, 20), (0.4, 20), (0.5, 20)):
            probs += [p] * n
            labels += [1] * int(p * n) + [0] * (n - int(p * n))
        stat, pval, groups = hosmer_lemeshow(probs, labels, n_groups=5)
        assert stat == pytest.approx(0.0, abs=1e-9)
        assert pval == pytest.approx(1.0, abs=1e-9)
        assert len(groups) == 5
        for g in groups:
            assert g.observed_rate == pytest.approx(g.mean_prob)

    def test_p_value_uses_g_minus_2_df(self):
        probs = np.linspace(0.05, 0.95, 200)
        rng = np.random.default_rng(3)
        labels = (rng.random(200) < probs).astype(int)
        stat, pval, _ = hosmer_lemeshow(probs, labels, n_groups=5)
        assert pval == pytest.approx(chi_square_sf(stat, 3), rel=1e-12)

    def test_ties_stay_in_one_group(self):
        probs = [0.1] * 30 + [0.9] * 10
        labels = [0] * 27 + [1] * 3 + [1] * 9 + [0]
        with pytest.raises(DegenerateGroupsError):
            # only two distinct prob levels: cannot form 5 groups
            hosmer_lemeshow(probs, labels, n_groups=5)
        stat, pval, groups = hosmer_lemeshow(probs, labels, n_groups=2)
        assert [g.n for g in groups] == [30, 10]

    def test_group_order_invariance(self):
        rng = np.random.default_rng(4)
        probs = rng.random(300)
        labels = (rng.random(300) < probs).astype(int)
        stat1, _, _ = hosmer_lemeshow(probs, labels)
        perm = rng.permutation(300)
        stat2, _, _ = hosmer_lemeshow(probs[perm], labels[perm])
        assert stat1 == pytest.approx(stat2, rel=1e-9)

    def test_degenerate_expected_rejected(self):
        probs = [0.0] * 50 + list(np.linspace(0.1, 0.9, 50))
        labels = [0] * 50 + [1] * 50
        with pytest.raises(DegenerateGroupsError):
            hosmer_lemeshow(probs, labels, n_groups=5)


class TestEvalReport:
    def test_report_fields(self):
        rng = np.random.default_rng(9)
        probs = rng.random(500)
        labels = (rng.random(500) < probs).astype(int)
        report = evaluate_scores(probs, probs, labels)
        tp, fp, tn, fn = confusion(probs, labels)
        assert report.accuracy == pytest.approx((tp + tn) / 500)
        assert report.n == 500
        assert report.n_positive == int(labels.sum())
        assert 0 <= report.pr_auc <= 1 and 0 <= report.roc_auc <= 1
        assert report.hl_p_value is not None
        # complementarity: control-class recall counts the same TN cells
        assert report.recall_ctrl == pytest.approx(tn / (tn + fp))
        assert report.precision_ctrl == pytest.approx(tn / (tn + fn))
