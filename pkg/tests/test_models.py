import math

import numpy as np
import pytest

from adscreen.errors import DataError
from adscreen.models import (
    Forest,
    Tree,
    decision_score,
    predict_proba,
    train_adaboost,
    train_lr,
    train_rf,
    train_svm,
)
from adscreen.models.linear import lr_gradient, lr_objective, platt_fit

from .util import central_difference_gradient


def toy_problem(rng, n=40, k=4):
    X = rng.normal(size=(n, k))
    w_true = rng.normal(size=k)
    y = (X @ w_true + 0.3 * rng.normal(size=n) > 0).astype(float)
    if y.sum() in (0, n):
        y[0] = 1 - y[0]
    return X, y


class TestLogisticRegression:
    def test_separable_one_dimensional(self):
        X = np.array([[-1.0], [1.0]])
        y = np.array([0.0, 1.0])
        model = train_lr(X, y, l2_lambda=0.0, standardize=False)
        assert model.weights[0] > 0
        assert np.all((predict_proba(model, X) >= 0.5) == y.astype(bool))

    def test_degenerate_single_class(self):
        X = np.array([[0.4], [0.6], [0.5]])
        y = np.ones(3)
        model = train_lr(X, y, l2_lambda=0.1)
        assert np.all(predict_proba(model, X) > 0.9)  # approx the prevalence of 1.0
        assert abs(model.weights[0]) < 0.2

    def test_gradient_closed_form_point(self):
        # single sample x=[1], y=1 at the origin: sigmoid(0)=0.5
        gw, gb = lr_gradient(np.zeros(1), 0.0, np.array([[1.0]]), np.array([1.0]), 0.0)
        assert gw[0] == pytest.approx(-0.5)
        assert gb == pytest.approx(-0.5)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(12)
        worst = 0.0
        for _ in range(50):
            n, k = int(rng.integers(5, 30)), int(rng.integers(1, 6))
            X, y = toy_problem(rng, n, k)
            lam = float(rng.random() * 0.1)
            point = rng.normal(size=k + 1) * 0.5

            def f(p):
                return lr_objective(p[:-1], p[-1], X, y, lam)

            numeric = central_difference_gradient(f, point)
            gw, gb = lr_gradient(point[:-1], point[-1], X, y, lam)
            analytic = np.concatenate([gw, [gb]])
            rel = np.abs(analytic - numeric) / np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))
            worst = max(worst, float(rel.max()))
        assert worst <= 1e-6

    def test_deterministic(self):
        rng = np.random.default_rng(1)
        X, y = toy_problem(rng, 60, 5)
        m1 = train_lr(X, y, seed=0)
        m2 = train_lr(X, y, seed=0)
        assert np.array_equal(m1.weights, m2.weights) and m1.bias == m2.bias

    def test_scaling_stored_and_replayed(self):
        rng = np.random.default_rng(2)
        X, y = toy_problem(rng, 80, 3)
        X[:, 1] = X[:, 1] * 100 + 5  # wild scale
        model = train_lr(X, y)
        assert model.scaling is not None
        z = model.scaling.transform(X) @ model.weights + model.bias
        manual = 1.0 / (1.0 + np.exp(-z))
        assert np.allclose(predict_proba(model, X), np.clip(manual, 1e-15, 1 - 1e-15))

    def test_positive_weight_monotonicity(self):
        rng = np.random.default_rng(3)
        X, y = toy_problem(rng, 100, 3)
        model = train_lr(X, y)
        j = int(np.argmax(model.weights))
        if model.weights[j] <= 0:
            pytest.skip("no positive weight in this fit")
        x = X[0].copy()
        p_lo = predict_proba(model, x[None, :])[0]
        x[j] += 1.0
        p_hi = predict_proba(model, x[None, :])[0]
        assert p_hi >= p_lo

    def test_nonfinite_rejected(self):
        with pytest.raises(DataError):
            train_lr(np.array([[np.nan]]), np.array([1.0]))

    def test_nonconvergence_flagged_not_fatal(self):
        rng = np.random.default_rng(4)
        X, y = toy_problem(rng, 50, 3)
        model = train_lr(X, y, l2_lambda=0.0, max_iters=2)
        assert model.meta["converged"] is False

    def test_zero_model_outputs_half(self):
        from adscreen.models import LinearModel

        model = LinearModel(kind="logistic", weights=np.zeros(3), bias=0.0)
        rng = np.random.default_rng(0)
        assert np.all(predict_proba(model, rng.normal(size=(5, 3))) == 0.5)

    def test_probability_never_exactly_zero_or_one(self):
        X = np.array([[-1.0], [1.0]])
        y = np.array([0.0, 1.0])
        model = train_lr(X, y, l2_lambda=0.0, standardize=False, max_iters=2000)
        p = predict_proba(model, np.array([[1e6], [-1e6]]))
        assert 0.0 < p.min() and p.max() < 1.0


class TestSvm:
    def test_separable_two_points(self):
        X = np.array([[-1.0], [1.0]])
        y = np.array([0.0, 1.0])
        model = train_svm(X, y, reg_lambda=1e-3, epochs=200, standardize=False)
        margins = decision_score(model, X)
        y_pm = np.array([-1.0, 1.0])
        hinge = np.maximum(0.0, 1.0 - y_pm * margins)
        assert hinge.max() < 0.05

    def test_objective_non_increasing_on_averaged_iterates(self):
        rng = np.random.default_rng(5)
        X, y = toy_problem(rng, 200, 5)
        model = train_svm(X, y, reg_lambda=1e-3, epochs=15, seed=0)
        path = model.meta["objective_path"]
        for a, b in zip(path, path[1:]):
            assert b <= a + 1e-3

    def test_label_flip_negates_margins(self):
        rng = np.random.default_rng(6)
        X, y = toy_problem(rng, 100, 4)
        m_pos = train_svm(X, y, seed=0)
        m_neg = train_svm(X, 1.0 - y, seed=0)
        assert np.allclose(decision_score(m_pos, X), -decision_score(m_neg, X), atol=1e-9)

    def test_platt_probabilities_monotone_in_margin(self):
        rng = np.random.default_rng(7)
        X, y = toy_problem(rng, 150, 4)
        model = train_svm(X, y)
        margins = decision_score(model, X)
        probs = predict_proba(model, X)
        order = np.argsort(margins)
        assert np.all(np.diff(probs[order]) >= -1e-12)

    def test_margin_sign_gives_class(self):
        rng = np.random.default_rng(15)
        X, y = toy_problem(rng, 200, 4)
        model = train_svm(X, y, epochs=10, seed=0)
        margins = decision_score(model, X)
        probs = predict_proba(model, X)
        agree = np.mean((margins > 0) == (probs >= 0.5))
        assert agree > 0.97  # Platt's fitted sigmoid crosses 0.5 near margin 0

    def test_platt_fit_recovers_sigmoid(self):
        rng = np.random.default_rng(8)
        margins = rng.normal(size=4000) * 2
        probs = 1.0 / (1.0 + np.exp(-(1.5 * margins - 0.3)))
        y = (rng.random(4000) < probs).astype(float)
        a, b = platt_fit(margins, y)
        assert a == pytest.approx(1.5, abs=0.2)
        assert b == pytest.approx(-0.3, abs=0.2)


class TestAdaBoost:
    def test_alpha_closed_form_quarter_error(self):
        # one feature where the best stump errs on exactly 1 of 4 points
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = np.array([-1.0, -1.0, 1.0, -1.0])
        model = train_adaboost(X, y, n_rounds=1)
        assert model.meta["round_errors"][0] == pytest.approx(0.25)
        assert model.stumps[0][3] == pytest.approx(0.5 * math.log(3.0))

    def test_separable_perfect_after_round_one(self):
        X = np.array([[0.0], [1.0], [2.0], [10.0], [11.0], [12.0]])
        y = np.array([0, 0, 0, 1, 1, 1], dtype=float)
        model = train_adaboost(X, y, n_rounds=10)
        assert len(model.stumps) == 1  # perfect stump stops early
        assert model.stumps[0][3] > 5  # capped alpha is large
        pred = decision_score(model, X) > 0
        assert np.array_equal(pred, y.astype(bool))

    def test_exponential_loss_non_increasing(self):
        rng = np.random.default_rng(9)
        X, y = toy_problem(rng, 150, 6)
        model = train_adaboost(X, y, n_rounds=40)
        path = model.meta["exp_loss_path"]
        assert len(path) >= 10
        for a, b in zip(path, path[1:]):
            assert b <= a + 1e-12

    def test_every_round_error_below_half(self):
        rng = np.random.default_rng(10)
        X, y = toy_problem(rng, 120, 5)
        model = train_adaboost(X, y, n_rounds=60)
        assert all(e < 0.5 for e in model.meta["round_errors"])
        assert all(alpha > 0 for _, _, _, alpha in model.stumps)

    def test_single_class_rejected(self):
        with pytest.raises(DataError):
            train_adaboost(np.array([[0.0], [1.0]]), np.array([1.0, 1.0]))


def exhaustive_tree_predictions(X, y):
    """Tiny reference CART: exhaustive gini splits, grown to purity."""

    def gini(labels):
        if len(labels) == 0:
            return 0.0
        p = labels.mean()
        return 2 * p * (1 - p)

    def grow(idx):
        labels = y[idx]
        if len(set(labels.tolist())) == 1:
            return ("leaf", labels[0])
        best = None
        for f in range(X.shape[1]):
            values = sorted(set(X[idx, f].tolist()))
            for a, b in zip(values, values[1:]):
                thr = (a + b) / 2
                left = idx[X[idx, f] <= thr]
                right = idx[X[idx, f] > thr]
                score = (len(left) * gini(y[left]) + len(right) * gini(y[right])) / len(idx)
                if best is None or score < best[0]:
                    best = (score, f, thr, left, right)
        if best is None:
            return ("leaf", round(labels.mean()))
        _, f, thr, left, right = best
        return ("node", f, thr, grow(left), grow(right))

    root = grow(np.arange(len(y)))

    def predict_one(x, node):
        while node[0] == "node":
            _, f, thr, l, r = node
            node = l if x[f] <= thr else r
        return node[1]

    return np.array([predict_one(x, root) for x in X])


class TestRandomForest:
    def test_depth_zero_single_leaf_prevalence(self):
        rng = np.random.default_rng(11)
        X, y = toy_problem(rng, 50, 3)
        model = train_rf(X, y, n_trees=5, max_depth=0, seed=0)
        for tree in model.trees:
            assert len(tree.feature) == 1
            assert tree.feature[0] == -1
            assert tree.count0[0] + tree.count1[0] == 50  # bootstrap size

    def test_pure_node_not_split(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = np.array([1, 1, 1, 1])
        model = train_rf(X, y, n_trees=1, max_depth=5, seed=0, bootstrap=False)
        assert len(model.trees[0].feature) == 1

    def test_single_tree_matches_exhaustive_oracle(self):
        rng = np.random.default_rng(12)
        X = rng.normal(size=(10, 3))
        y = (X[:, 0] + 0.5 * X[:, 1] > 0).astype(int)
        if y.sum() in (0, 10):
            y[0] = 1 - y[0]
        model = train_rf(X, y, n_trees=1, max_depth=10, features_per_split=3,
                         seed=0, bootstrap=False)
        probs = predict_proba(model, X)
        oracle = exhaustive_tree_predictions(X, y.astype(float))
        assert np.array_equal(probs > 0.5, oracle.astype(bool))
        assert np.array_equal(probs > 0.5, y.astype(bool))

    def test_vote_fraction(self):
        # hand-built forest: 7 of 10 single-leaf trees vote positive
        trees = []
        for i in range(10):
            pos = i < 7
            trees.append(
                Tree(
                    feature=np.array([-1], dtype=np.int32),
                    threshold=np.array([0.0]),
                    left=np.array([0], dtype=np.int32),
                    right=np.array([0], dtype=np.int32),
                    count0=np.array([0 if pos else 5], dtype=np.int64),
                    count1=np.array([5 if pos else 0], dtype=np.int64),
                )
            )
        forest = Forest(trees=trees, n_features=2, max_depth=0, features_per_split=1)
        assert predict_proba(forest, np.zeros((3, 2))).tolist() == [0.7, 0.7, 0.7]

    def test_deterministic_by_seed(self):
        rng = np.random.default_rng(13)
        X, y = toy_problem(rng, 80, 5)
        p1 = predict_proba(train_rf(X, y, n_trees=10, seed=4), X)
        p2 = predict_proba(train_rf(X, y, n_trees=10, seed=4), X)
        assert np.array_equal(p1, p2)
        p3 = predict_proba(train_rf(X, y, n_trees=10, seed=5), X)
        assert not np.array_equal(p1, p3)

    def test_dimension_mismatch_rejected(self):
        rng = np.random.default_rng(14)
        X, y = toy_problem(rng, 30, 4)
        model = train_rf(X, y, n_trees=3, seed=0)
        with pytest.raises(ValueError):
            predict_proba(model, np.zeros((2, 5)))
