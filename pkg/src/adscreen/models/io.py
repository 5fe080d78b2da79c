"""Versioned plain-text model serialization.

Line-oriented, binary-free, diffable. Floats are written with repr(), which
Python guarantees to round-trip to the identical double, so save -> load ->
save is byte-identical. Runtime metadata (meta dicts) is not persisted.
"""

from __future__ import annotations

import numpy as np

from ..errors import DataError
from .base import Forest, LinearModel, Standardizer, StumpEnsemble, Tree

FORMAT_HEADER = "adscreen-model 1"


def _fmt_floats(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def save_model(model, path: str) -> None:
    lines = [FORMAT_HEADER]
    if isinstance(model, LinearModel):
        lines.append(f"kind {model.kind}")
        lines.append(f"n_features {model.n_features}")
        if model.scaling is not None:
            lines.append("scaling 1")
            lines.append("mean " + _fmt_floats(model.scaling.mean))
            lines.append("std " + _fmt_floats(model.scaling.std))
        else:
            lines.append("scaling 0")
        lines.append("bias " + repr(float(model.bias)))
        if model.platt is not None:
            lines.append("platt " + _fmt_floats(model.platt))
        lines.append("weights")
        lines.extend(repr(float(w)) for w in model.weights)
    elif isinstance(model, StumpEnsemble):
        lines.append("kind adaboost")
        lines.append(f"n_features {model.n_features}")
        lines.append(f"n_stumps {len(model.stumps)}")
        lines.append("stumps")
        for feature, threshold, polarity, alpha in model.stumps:
            lines.append(f"{feature} {repr(float(threshold))} {polarity} {repr(float(alpha))}")
    elif isinstance(model, Forest):
        lines.append("kind forest")
        lines.append(f"n_features {model.n_features}")
        lines.append(f"max_depth {model.max_depth}")
        lines.append(f"features_per_split {model.features_per_split}")
        lines.append(f"n_trees {len(model.trees)}")
        for tree in model.trees:
            lines.append(f"tree {len(tree.feature)}")
            for i in range(len(tree.feature)):
                lines.append(
                    f"{tree.feature[i]} {repr(float(tree.threshold[i]))} "
                    f"{tree.left[i]} {tree.right[i]} {tree.count0[i]} {tree.count1[i]}"
                )
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    lines.append("end")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


class _Reader:
    def __init__(self, path: str):
        with open(path) as f:
            self.lines = f.read().splitlines()
        self.pos = 0

    def next(self) -> str:
        if self.pos >= len(self.lines):
            raise DataError("truncated model file")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def expect(self, prefix: str) -> str:
        line = self.next()
        if not line.startswith(prefix):
            raise DataError(f"expected {prefix!r}, found {line!r}")
        return line[len(prefix) :].strip()


def load_model(path: str):
    r = _Reader(path)
    if r.next() != FORMAT_HEADER:
        raise DataError(f"{path}: not a model file")
    kind = r.expect("kind ")
    n_features = int(r.expect("n_features "))
    if kind in ("logistic", "svm"):
        scaling = None
        if r.expect("scaling ") == "1":
            mean = np.array([float(v) for v in r.expect("mean ").split()])
            std = np.array([float(v) for v in r.expect("std ").split()])
            scaling = Standardizer(mean=mean, std=std)
        bias = float(r.expect("bias "))
        platt = None
        line = r.next()
        if line.startswith("platt "):
            a, b = line[len("platt "):].split()
            platt = (float(a), float(b))
            line = r.next()
        if line != "weights":
            raise DataError(f"expected weights section, found {line!r}")
        weights = np.array([float(r.next()) for _ in range(n_features)])
        if r.next() != "end":
            raise DataError("missing end marker")
        return LinearModel(kind=kind, weights=weights, bias=bias, scaling=scaling, platt=platt)
    if kind == "adaboost":
        n_stumps = int(r.expect("n_stumps "))
        if r.next() != "stumps":
            raise DataError("expected stumps section")
        stumps = []
        for _ in range(n_stumps):
            feature, threshold, polarity, alpha = r.next().split()
            stumps.append((int(feature), float(threshold), int(polarity), float(alpha)))
        if r.next() != "end":
            raise DataError("missing end marker")
        return StumpEnsemble(stumps=stumps, n_features=n_features)
    if kind == "forest":
        max_depth = int(r.expect("max_depth "))
        features_per_split = int(r.expect("features_per_split "))
        n_trees = int(r.expect("n_trees "))
        trees = []
        for _ in range(n_trees):
            n_nodes = int(r.expect("tree "))
            feature = np.empty(n_nodes, dtype=np.int32)
            threshold = np.empty(n_nodes, dtype=np.float64)
            left = np.empty(n_nodes, dtype=np.int32)
            right = np.empty(n_nodes, dtype=np.int32)
            count0 = np.empty(n_nodes, dtype=np.int64)
            count1 = np.empty(n_nodes, dtype=np.int64)
            for i in range(n_nodes):
                f_, t_, l_, r_, c0, c1 = r.next().split()
                feature[i], threshold[i] = int(f_), float(t_)
                left[i], right[i] = int(l_), int(r_)
                count0[i], count1[i] = int(c0), int(c1)
            trees.append(Tree(feature, threshold, left, right, count0, count1))
        if r.next() != "end":
            raise DataError("missing end marker")
        return Forest(trees=trees, n_features=n_features, max_depth=max_depth,
                      features_per_split=features_per_split)
    raise DataError(f"unknown model kind {kind!r}")
