"""From-scratch classifiers behind one train/predict surface.

Four families live here (Gaussian naive Bayes, entropy decision tree,
distance-weighted KNN, random forest); the kernel SVM is in palsy.svm.  All
tie-breaks use the fixed class order P < C < H (argmax over ascending class
codes).  Trained models are immutable and serialize to a versioned JSON
structure via save_model/load_model.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from palsy import _core
from palsy.errors import DimensionMismatch, EmptyInput, KTooLarge
from palsy.features import FeatureMatrix

N_CLASSES = 3

MODEL_FORMAT = "palsy-model/1"


def log2_table(n: int) -> np.ndarray:
    """log2(k) for k = 0..n; entry 0 is unused (0 * log2(0) terms vanish)."""
    t = np.empty(n + 1)
    t[0] = 0.0
    t[1:] = np.log2(np.arange(1, n + 1))
    return t


def _check_row(row, f: int) -> np.ndarray:
    row = np.asarray(row, dtype=np.float64).ravel()
    if row.shape[0] != f:
        raise DimensionMismatch(f"expected {f} features, got {row.shape[0]}")
    return row


def unpack_data(data) -> tuple[np.ndarray, np.ndarray]:
    """Accept a FeatureMatrix or a plain (X, y) pair."""
    if isinstance(data, FeatureMatrix):
        return data.rows, data.labels
    X, y = data
    return np.asarray(X, dtype=np.float64), np.asarray(y, dtype=np.int64)


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return X.reshape(1, -1) if X.ndim == 1 else X


# ---------------------------------------------------------------------------
# Gaussian naive Bayes


@dataclass(frozen=True)
class GnbModel:
    classes: np.ndarray  # present class codes, ascending
    priors: np.ndarray  # (k,)
    means: np.ndarray  # (k, f)
    variances: np.ndarray  # (k, f), smoothed

    @property
    def n_features(self) -> int:
        return self.means.shape[1]

    def predict(self, X) -> np.ndarray:
        X = _as_matrix(X)
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        # log prior + sum of log Gaussian densities, per present class
        scores = np.empty((X.shape[0], len(self.classes)))
        for k in range(len(self.classes)):
            mu = self.means[k]
            var = self.variances[k]
            ll = -0.5 * np.log(2.0 * np.pi * var) - (X - mu) ** 2 / (2.0 * var)
            scores[:, k] = np.log(self.priors[k]) + ll.sum(axis=1)
        return self.classes[np.argmax(scores, axis=1)]

    def predict_one(self, row) -> int:
        return int(self.predict(_check_row(row, self.n_features))[0])


def gnb_train(data) -> GnbModel:
    """Class priors from counts; per-class feature means and population
    variances, smoothed by 1e-9 times the largest total feature variance."""
    X, y = unpack_data(data)
    if X.shape[0] == 0:
        raise EmptyInput("cannot train on an empty matrix")
    classes = np.unique(y)
    eps = 1e-9 * float(X.var(axis=0).max())
    priors = np.empty(len(classes))
    means = np.empty((len(classes), X.shape[1]))
    variances = np.empty((len(classes), X.shape[1]))
    for k, cls in enumerate(classes):
        rows = X[y == cls]
        priors[k] = rows.shape[0] / X.shape[0]
        means[k] = rows.mean(axis=0)
        variances[k] = rows.var(axis=0) + eps
    return GnbModel(classes=classes, priors=priors, means=means, variances=variances)


def gnb_predict(model: GnbModel, row) -> int:
    return model.predict_one(row)


# ---------------------------------------------------------------------------
# decision tree


@dataclass(frozen=True)
class TreeNode:
    counts: tuple[int, ...]
    feature: int = -1
    threshold: float = 0.0
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0

    @property
    def label(self) -> int:
        return int(np.argmax(self.counts))


@dataclass(frozen=True)
class TreeModel:
    root: TreeNode
    n_features: int
    max_depth: int

    def predict(self, X) -> np.ndarray:
        X = _as_matrix(X)
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        out = np.empty(X.shape[0], dtype=np.int64)
        for i, row in enumerate(X):
            node = self.root
            while not node.is_leaf:
                node = node.left if row[node.feature] <= node.threshold else node.right
            out[i] = node.label
        return out

    def predict_one(self, row) -> int:
        return int(self.predict(_check_row(row, self.n_features))[0])

    def depth(self) -> int:
        def walk(node):
            if node.is_leaf:
                return 0
            return 1 + max(walk(node.left), walk(node.right))

        return walk(self.root)


def _grow_tree(X, y, depth, max_depth, table, feature_sampler) -> TreeNode:
    counts = np.bincount(y, minlength=N_CLASSES)
    if depth >= max_depth or int(counts.max()) == len(y):
        return TreeNode(counts=tuple(int(c) for c in counts))
    feats = feature_sampler()
    feat, thr, gain = _core.best_split(X, y, feats, N_CLASSES, table)
    if feat < 0 or gain <= 0.0:
        return TreeNode(counts=tuple(int(c) for c in counts))
    mask = X[:, feat] <= thr
    left = _grow_tree(X[mask], y[mask], depth + 1, max_depth, table, feature_sampler)
    right = _grow_tree(X[~mask], y[~mask], depth + 1, max_depth, table, feature_sampler)
    return TreeNode(counts=tuple(int(c) for c in counts), feature=int(feat), threshold=float(thr), left=left, right=right)


def tree_train(data, max_depth: int = 10, seed: int = 0) -> TreeModel:
    """Greedy information-gain tree; thresholds are midpoints between
    consecutive distinct sorted values; stops at purity, depth, or no gain."""
    X, y = unpack_data(data)
    if X.shape[0] == 0:
        raise EmptyInput("cannot train on an empty matrix")
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    table = log2_table(X.shape[0])
    all_feats = np.arange(X.shape[1], dtype=np.int64)
    root = _grow_tree(X, y, 0, max_depth, table, lambda: all_feats)
    return TreeModel(root=root, n_features=X.shape[1], max_depth=max_depth)


# ---------------------------------------------------------------------------
# distance-weighted KNN

EXACT_MATCH_DIST = 1e-12


@dataclass(frozen=True)
class KnnModel:
    train_rows: np.ndarray
    train_labels: np.ndarray
    k: int

    @property
    def n_features(self) -> int:
        return self.train_rows.shape[1]

    def predict(self, X) -> np.ndarray:
        X = _as_matrix(X)
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        return np.array([self._predict_row(row) for row in X], dtype=np.int64)

    def _predict_row(self, row) -> int:
        d = np.sqrt(((self.train_rows - row) ** 2).sum(axis=1))
        exact = d < EXACT_MATCH_DIST
        scores = np.zeros(N_CLASSES)
        if exact.any():
            # exact matches vote alone, equally weighted
            for cls in self.train_labels[exact]:
                scores[cls] += 1.0
        else:
            order = np.lexsort((np.arange(d.shape[0]), d))[: self.k]
            for i in order:
                scores[self.train_labels[i]] += 1.0 / d[i]
        return int(np.argmax(scores))

    def predict_one(self, row) -> int:
        return int(self.predict(_check_row(row, self.n_features))[0])


def knn_fit(data, k: int = 5) -> KnnModel:
    X, y = unpack_data(data)
    if X.shape[0] == 0:
        raise EmptyInput("cannot fit KNN on an empty matrix")
    if not 1 <= k <= X.shape[0]:
        raise KTooLarge(f"k={k} must be in 1..{X.shape[0]}")
    return KnnModel(train_rows=X, train_labels=y, k=k)


def knn_predict(train, row, k: int) -> int:
    """Inverse-distance-weighted vote over the k nearest training rows."""
    return knn_fit(train, k).predict_one(row)


# ---------------------------------------------------------------------------
# random forest


@dataclass(frozen=True)
class ForestModel:
    trees: tuple[TreeModel, ...]
    n_features: int
    seed: int
    features_per_split: int

    def predict(self, X) -> np.ndarray:
        X = _as_matrix(X)
        votes = np.zeros((X.shape[0], N_CLASSES), dtype=np.int64)
        for tree in self.trees:
            pred = tree.predict(X)
            votes[np.arange(X.shape[0]), pred] += 1
        return np.argmax(votes, axis=1)

    def predict_one(self, row) -> int:
        return int(self.predict(_check_row(row, self.n_features))[0])


def forest_train(
    data,
    n_estimators: int = 100,
    max_depth: int = 10,
    seed: int = 0,
    bootstrap: bool = True,
    features_per_split: int | None = None,
) -> ForestModel:
    """Bootstrap-resampled trees voting by majority.

    Each tree trains on n draws with replacement and considers
    ceil(sqrt(f)) randomly chosen features per split; per-tree randomness
    derives from (seed, tree index), so equal seeds give equal forests.
    ``bootstrap`` and ``features_per_split`` are test hooks.
    """
    X, y = unpack_data(data)
    if X.shape[0] == 0:
        raise EmptyInput("cannot train on an empty matrix")
    if n_estimators < 1:
        raise ValueError("n_estimators must be >= 1")
    n, f = X.shape
    m = features_per_split if features_per_split is not None else math.ceil(math.sqrt(f))
    m = min(m, f)
    table = log2_table(n)
    trees = []
    for t in range(n_estimators):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), t]))
        if bootstrap:
            rows = rng.integers(0, n, size=n)
            Xb, yb = X[rows], y[rows]
        else:
            Xb, yb = X, y

        if m >= f:
            sampler = lambda: np.arange(f, dtype=np.int64)  # noqa: E731
        else:
            sampler = lambda: rng.choice(f, size=m, replace=False).astype(np.int64)  # noqa: E731
        root = _grow_tree(Xb, yb, 0, max_depth, table, sampler)
        trees.append(TreeModel(root=root, n_features=f, max_depth=max_depth))
    return ForestModel(trees=tuple(trees), n_features=f, seed=seed, features_per_split=m)


# ---------------------------------------------------------------------------
# serialization


def _tree_to_dict(node: TreeNode) -> dict:
    d = {"counts": list(node.counts)}
    if not node.is_leaf:
        d.update(
            feature=node.feature,
            threshold=node.threshold,
            left=_tree_to_dict(node.left),
            right=_tree_to_dict(node.right),
        )
    return d


def _tree_from_dict(d: dict) -> TreeNode:
    if "feature" not in d:
        return TreeNode(counts=tuple(d["counts"]))
    return TreeNode(
        counts=tuple(d["counts"]),
        feature=d["feature"],
        threshold=d["threshold"],
        left=_tree_from_dict(d["left"]),
        right=_tree_from_dict(d["right"]),
    )


def model_to_dict(model) -> dict:
    from palsy import svm as _svm

    if isinstance(model, GnbModel):
        state = {
            "classes": model.classes.tolist(),
            "priors": model.priors.tolist(),
            "means": model.means.tolist(),
            "variances": model.variances.tolist(),
        }
        family = "gnb"
    elif isinstance(model, TreeModel):
        state = {"root": _tree_to_dict(model.root), "n_features": model.n_features, "max_depth": model.max_depth}
        family = "tree"
    elif isinstance(model, KnnModel):
        state = {"rows": model.train_rows.tolist(), "labels": model.train_labels.tolist(), "k": model.k}
        family = "knn"
    elif isinstance(model, ForestModel):
        state = {
            "trees": [
                {"root": _tree_to_dict(t.root), "n_features": t.n_features, "max_depth": t.max_depth}
                for t in model.trees
            ],
            "n_features": model.n_features,
            "seed": model.seed,
            "features_per_split": model.features_per_split,
        }
        family = "forest"
    elif isinstance(model, _svm.SvmModel):
        family = "svm"
        state = _svm.svm_state_dict(model)
    else:
        raise TypeError(f"unknown model type {type(model).__name__}")
    return {"format": MODEL_FORMAT, "family": family, "state": state}


def model_from_dict(d: dict):
    from palsy import svm as _svm

    if d.get("format") != MODEL_FORMAT:
        raise ValueError(f"unsupported model format {d.get('format')!r}")
    family, state = d["family"], d["state"]
    if family == "gnb":
        return GnbModel(
            classes=np.array(state["classes"], dtype=np.int64),
            priors=np.array(state["priors"]),
            means=np.array(state["means"]),
            variances=np.array(state["variances"]),
        )
    if family == "tree":
        return TreeModel(root=_tree_from_dict(state["root"]), n_features=state["n_features"], max_depth=state["max_depth"])
    if family == "knn":
        return KnnModel(
            train_rows=np.array(state["rows"]),
            train_labels=np.array(state["labels"], dtype=np.int64),
            k=state["k"],
        )
    if family == "forest":
        return ForestModel(
            trees=tuple(
                TreeModel(root=_tree_from_dict(t["root"]), n_features=t["n_features"], max_depth=t["max_depth"])
                for t in state["trees"]
            ),
            n_features=state["n_features"],
            seed=state["seed"],
            features_per_split=state["features_per_split"],
        )
    if family == "svm":
        return _svm.svm_from_state(state)
    raise ValueError(f"unknown model family {family!r}")


def save_model(model, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, sort_keys=True)
        fh.write("\n")


def load_model(path):
    with open(path) as fh:
        return model_from_dict(json.load(fh))
