"""CART decision trees and a bagged random forest.

Gini impurity, midpoint thresholds between consecutive distinct values,
bootstrap per tree and a fresh feature subsample at every node. Each tree
draws from its own RNG derived from ``(seed, tree_index)`` so results do not
depend on training order. Prediction is a hard majority vote; ties go to the
lowest class index.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 50
    max_depth: int = 12
    min_leaf: int = 2
    max_features: int | str = "sqrt"  # "sqrt", "all" or a count
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_trees < 1 or self.max_depth < 0 or self.min_leaf < 1:
            raise ValueError(f"invalid forest parameters {self}")
        mf = self.max_features
        if not (mf in ("sqrt", "all") or (isinstance(mf, int) and not isinstance(mf, bool) and mf >= 1)):
            raise ValueError(f"max_features must be 'sqrt', 'all' or a positive int, got {mf!r}")

    def n_split_features(self, n_features: int) -> int:
        if self.max_features == "sqrt":
            return max(1, int(math.sqrt(n_features)))
        if self.max_features == "all":
            return n_features
        return min(self.max_features, n_features)


DEFAULT_GRID = tuple(ForestParams(n_trees=t, max_depth=d) for d in (8, 12, 16) for t in (25, 50))


@dataclass
class Tree:
    feature: np.ndarray    # int32, -1 marks a leaf
    threshold: np.ndarray  # float64, go left when x <= threshold
    left: np.ndarray       # int32
    right: np.ndarray      # int32
    value: np.ndarray      # (n_nodes, n_classes) class distribution per node

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray, backend=None) -> np.ndarray:
        impl = backend or kernels
        return impl.apply_tree(self.feature, self.threshold, self.left, self.right, X)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            np.asarray(d["feature"], dtype=np.int32),
            np.asarray(d["threshold"], dtype=np.float64),
            np.asarray(d["left"], dtype=np.int32),
            np.asarray(d["right"], dtype=np.int32),
            np.asarray(d["value"], dtype=np.float64).reshape(len(d["feature"]), -1),
        )


@dataclass
class ForestModel:
    classes: tuple
    n_features: int
    params: ForestParams = field(default_factory=ForestParams)
    trees: list[Tree] = field(default_factory=list)
    degenerate: bool = False
    seed: int = 0

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def _check(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got shape {X.shape}")
        return X

    def votes(self, X, backend=None) -> np.ndarray:
        """(n_samples, n_classes) count of trees voting for each class."""
        X = self._check(X)
        out = np.zeros((X.shape[0], self.n_classes), dtype=np.int64)
        if self.degenerate:
            out[:, 0] = len(self.trees) or 1
            return out
        rows = np.arange(X.shape[0])
        for tree in self.trees:
            leaf_class = np.argmax(tree.value, axis=1)
            np.add.at(out, (rows, leaf_class[tree.apply(X, backend)]), 1)
        return out

    def predict_index(self, X, backend=None) -> np.ndarray:
        return np.argmax(self.votes(X, backend), axis=1)

    def predict(self, X, backend=None) -> list:
        return [self.classes[i] for i in self.predict_index(X, backend)]

    def predict_proba(self, X, backend=None) -> np.ndarray:
        X = self._check(X)
        if self.degenerate:
            p = np.zeros((X.shape[0], self.n_classes))
            p[:, 0] = 1.0
            return p
        p = sum(tree.value[tree.apply(X, backend)] for tree in self.trees)
        return p / len(self.trees)

    def to_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "n_features": self.n_features,
            "params": asdict(self.params),
            "seed": self.seed,
            "degenerate": self.degenerate,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ForestModel":
        return cls(
            classes=tuple(d["classes"]),
            n_features=int(d["n_features"]),
            params=ForestParams(**d["params"]),
            trees=[Tree.from_dict(t) for t in d["trees"]],
            degenerate=bool(d["degenerate"]),
            seed=int(d["seed"]),
        )


def _grow_tree(X, y, n_classes, params: ForestParams, rng: np.random.Generator, impl) -> Tree:
    n, d = X.shape
    k = params.n_split_features(d)
    idx = rng.integers(0, n, size=n).astype(np.intp) if params.bootstrap else np.arange(n, dtype=np.intp)

    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(samples):
        counts = np.bincount(y[samples], minlength=n_classes).astype(np.float64)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(counts / counts.sum())
        return len(feature) - 1

    stack = [(new_node(idx), idx, 0)]
    while stack:
        node, samples, depth = stack.pop()
        if depth >= params.max_depth or len(samples) < 2 * params.min_leaf:
            continue
        if np.count_nonzero(value[node]) <= 1:
            continue
        feats = rng.choice(d, size=k, replace=False).astype(np.intp)
        f, thr, _ = impl.best_split(X, y, samples, feats, n_classes, params.min_leaf)
        if f < 0:
            continue
        go_left = X[samples, f] <= thr
        lsamp, rsamp = samples[go_left], samples[~go_left]
        feature[node], threshold[node] = f, thr
        left[node] = new_node(lsamp)
        right[node] = new_node(rsamp)
        # right pushed first so the left subtree is numbered first
        stack.append((right[node], rsamp, depth + 1))
        stack.append((left[node], lsamp, depth + 1))

    return Tree(
        np.asarray(feature, dtype=np.int32),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int32),
        np.asarray(right, dtype=np.int32),
        np.vstack(value),
    )


def _plain(v):
    return v.item() if isinstance(v, np.generic) else v


def train_forest(X, y, params: ForestParams = ForestParams(), seed: int = 0,
                 classes=None, backend=None) -> ForestModel:
    """Fit a forest on rows ``X`` with labels ``y``.

    ``classes`` fixes the label set and its order (defaults to the sorted
    distinct labels). With a single distinct label present the result is a
    constant model flagged ``degenerate``.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = [_plain(v) for v in y]
    if X.ndim != 2 or X.shape[0] != len(y):
        raise ValueError("X must be 2-D with one row per label")
    if X.shape[0] == 0:
        raise ValueError("cannot train on an empty data set")
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    present = sorted(set(y), key=lambda v: (str(type(v)), v))
    classes = tuple(_plain(c) for c in classes) if classes is not None else tuple(present)
    lookup = {c: i for i, c in enumerate(classes)}
    missing = [c for c in present if c not in lookup]
    if missing:
        raise ValueError(f"labels {missing} are not among classes {classes}")
    if len(present) == 1:
        warnings.warn(f"only one class ({present[0]!r}) in training data; model is constant", stacklevel=2)
        return ForestModel((present[0],) + tuple(c for c in classes if c != present[0]),
                           X.shape[1], params, [], degenerate=True, seed=seed)
    if X.shape[0] < 2 * params.min_leaf:
        raise ValueError(f"need at least {2 * params.min_leaf} samples")
    yi = np.asarray([lookup[v] for v in y], dtype=np.intp)
    impl = backend or kernels
    trees = [
        _grow_tree(X, yi, len(classes), params, np.random.default_rng(np.random.SeedSequence([seed, t])), impl)
        for t in range(params.n_trees)
    ]
    return ForestModel(classes, X.shape[1], params, trees, seed=seed)


def kfold_indices(n: int, folds: int, seed: int) -> list[np.ndarray]:
    if not 2 <= folds <= n:
        raise ValueError(f"cannot make {folds} folds from {n} samples")
    perm = np.random.default_rng(seed).permutation(n)
    return np.array_split(perm, folds)


def cross_val_accuracy(X, y, params: ForestParams = ForestParams(), folds: int = 5, seed: int = 0,
                       classes=None) -> float:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = list(y)
    classes = tuple(classes) if classes is not None else None
    scores = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for test in kfold_indices(len(y), folds, seed):
            mask = np.ones(len(y), dtype=bool)
            mask[test] = False
            train_idx = np.flatnonzero(mask)
            model = train_forest(X[train_idx], [y[i] for i in train_idx], params, seed, classes=classes)
            pred = model.predict(X[test])
            scores.append(np.mean([p == y[i] for p, i in zip(pred, test)]))
    return float(np.mean(scores))


def grid_search(X, y, grid=DEFAULT_GRID, folds: int = 5, seed: int = 0, classes=None):
    """Pick the grid entry with the best k-fold accuracy (first entry wins ties)."""
    results = [(p, cross_val_accuracy(X, y, p, folds, seed, classes)) for p in grid]
    best = max(results, key=lambda r: r[1])
    return best[0], results
