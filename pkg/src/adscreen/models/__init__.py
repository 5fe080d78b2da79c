"""Classifiers trained on keyword-age feature vectors.

Four model families share the predict_proba / decision_score interface:
logistic regression, linear SVM (Pegasos + Platt probabilities), AdaBoost
over decision stumps, and a Gini random forest. All are deterministic
given their seeds and serialize to a diffable text format.
"""

from .base import (
    Forest,
    LinearModel,
    Standardizer,
    StumpEnsemble,
    Tree,
    decision_score,
    predict_proba,
)
from .boost import train_adaboost
from .forest import train_rf
from .io import load_model, save_model
from .linear import train_lr, train_svm

__all__ = [
    "Forest",
    "LinearModel",
    "Standardizer",
    "StumpEnsemble",
    "Tree",
    "decision_score",
    "predict_proba",
    "train_adaboost",
    "train_lr",
    "train_rf",
    "train_svm",
    "load_model",
    "save_model",
]
