"""k-nearest neighbours, one-vs-rest linear SVM and random forest.

Every fitted model exposes ``predict(Xq) -> labels`` with labels in
``0..n_classes-1``; every tie resolves to the smallest class id.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _tree

CLASSIFIERS = ("knn", "svm", "rf")


def _check_fit(X, y, n_classes):
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError(f"need a non-empty training matrix, got shape {X.shape}")
    if y.shape != (X.shape[0],):
        raise ValueError("y length must match the number of rows of X")
    if y.min() < 0:
        raise ValueError("labels must be non-negative")
    n_classes = int(y.max()) + 1 if n_classes is None else int(n_classes)
    if y.max() >= n_classes:
        raise ValueError(f"label {y.max()} >= n_classes={n_classes}")
    return X, y, n_classes


def _check_query(Xq, p):
    Xq = np.ascontiguousarray(Xq, dtype=float)
    if Xq.ndim != 2 or Xq.shape[1] != p:
        raise ValueError(f"expected queries with {p} columns, got shape {Xq.shape}")
    return Xq


# ---------------------------------------------------------------- kNN

@dataclass(frozen=True)
class KNNModel:
    X: np.ndarray
    y: np.ndarray
    k: int
    n_classes: int

    def predict(self, Xq) -> np.ndarray:
        return predict_knn(self, Xq)


def fit_knn(X, y, k: int = 5, n_classes: int | None = None) -> KNNModel:
    X, y, n_classes = _check_fit(X, y, n_classes)
    if not 1 <= k <= X.shape[0]:
        raise ValueError(f"k must lie in [1, {X.shape[0]}], got {k}")
    return KNNModel(X, y, k, n_classes)


def predict_knn(model: KNNModel, Xq, chunk: int = 512) -> np.ndarray:
    """Majority vote; ties go to the smaller summed neighbour distance, then smaller id."""
    Xq = _check_query(Xq, model.X.shape[1])
    k, l = model.k, model.n_classes
    sq_train = (model.X ** 2).sum(axis=1)
    out = np.empty(Xq.shape[0], dtype=np.int64)
    for s in range(0, Xq.shape[0], chunk):
        Q = Xq[s:s + chunk]
        d2 = (Q ** 2).sum(axis=1)[:, None] + sq_train[None, :] - 2.0 * Q @ model.X.T
        d2 = np.maximum(d2, 0.0)
        nn = np.argsort(d2, axis=1, kind="stable")[:, :k]
        dist = np.sqrt(np.take_along_axis(d2, nn, axis=1))
        labels = model.y[nn]
        rows = np.repeat(np.arange(Q.shape[0]), k)
        votes = np.zeros((Q.shape[0], l))
        cum = np.zeros((Q.shape[0], l))
        np.add.at(votes, (rows, labels.ravel()), 1.0)
        np.add.at(cum, (rows, labels.ravel()), dist.ravel())
        cum[votes < votes.max(axis=1, keepdims=True)] = np.inf
        out[s:s + chunk] = np.argmin(cum, axis=1)
    return out


# ---------------------------------------------------------------- linear SVM

@dataclass(frozen=True)
class SVMModel:
    W: np.ndarray          # p x l
    b: np.ndarray          # l
    n_classes: int
    C: float
    objective_history: list = field(default_factory=list)

    def decision_function(self, Xq) -> np.ndarray:
        Xq = _check_query(Xq, self.W.shape[0])
        return Xq @ self.W + self.b

    def predict(self, Xq) -> np.ndarray:
        return predict_svm(self, Xq)


def svm_objective(X, Y, W, b, lam) -> float:
    """Sum over classes of mean hinge loss + lam/2 * ||w_c||^2 (Y in {-1, +1})."""
    margins = (X @ W + b) * Y
    hinge = np.maximum(0.0, 1.0 - margins).mean(axis=0)
    return float(np.sum(hinge + 0.5 * lam * (W ** 2).sum(axis=0)))


def fit_svm(X, y, C: float = 1.0, epochs: int = 100, seed: int = 0, batch_size: int = 64,
            n_classes: int | None = None, track_objective: bool = False,
            step_scale: float = 10.0, bias_step: float = 0.03) -> SVMModel:
    """One-vs-rest linear SVMs by shuffled mini-batch subgradient descent.

    Per class minimizes mean hinge + lam/2 ||w||^2 with lam = 1/(C n), i.e. the
    usual C-SVM primal divided by C n. Rows are visited in a shuffle of a
    canonical (lexicographic) order. Training runs on column-centred data
    and the shift is folded back into the bias. The returned weights are the
    running average of iterates after the first epoch.
    """
    X, y, n_classes = _check_fit(X, y, n_classes)
    if C <= 0:
        raise ValueError("C must be positive")
    if np.unique(y).size < 2:
        raise ValueError("SVM needs at least two classes")
    # canonical row order, so permuting the training rows cannot change the model
    order = np.lexsort(np.column_stack([X, y]).T)
    X, y = X[order], y[order]
    n, p = X.shape
    Y = np.where(y[:, None] == np.arange(n_classes)[None, :], 1.0, -1.0)
    lam = 1.0 / (C * n)
    mu = X.mean(axis=0)
    Xc = X - mu
    r2 = max(float((Xc ** 2).sum(axis=1).mean()), 1e-300)
    # weight step scales as 1/||x||^2, bias step is scale-free
    eta0 = step_scale / r2
    W = np.zeros((p, n_classes))
    b = np.zeros(n_classes)
    W_avg, b_avg = W.copy(), b.copy()
    n_avg = 0
    history = []
    rng = np.random.default_rng(seed)
    t = 0
    for epoch in range(epochs):
        perm = rng.permutation(n)
        for s in range(0, n, batch_size):
            idx = perm[s:s + batch_size]
            Xb, Yb = Xc[idx], Y[idx]
            active = ((Xb @ W + b) * Yb < 1.0) * Yb
            decay = 1.0 / (1.0 + lam * eta0 * t)
            W = W * (1.0 - eta0 * decay * lam) + (eta0 * decay / idx.size) * (Xb.T @ active)
            b = b + (bias_step * decay / idx.size) * active.sum(axis=0)
            t += 1
            if epoch >= 1 or epochs == 1:
                n_avg += 1
                W_avg += (W - W_avg) / n_avg
                b_avg += (b - b_avg) / n_avg
        if track_objective and (epoch >= 1 or epochs == 1):
            history.append(svm_objective(Xc, Y, W_avg, b_avg, lam))
    return SVMModel(W_avg, b_avg - mu @ W_avg, n_classes, C, history)


def predict_svm(model: SVMModel, Xq) -> np.ndarray:
    return np.argmax(model.decision_function(Xq), axis=1)


# ---------------------------------------------------------------- random forest

def gini(counts) -> float:
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    if total == 0:
        return 0.0
    frac = counts / total
    return float(1.0 - np.sum(frac ** 2))


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_class: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def predict(self, Xq) -> np.ndarray:
        return _tree.apply_tree(Xq, self.feature, self.threshold, self.left, self.right,
                                self.leaf_class)


@dataclass(frozen=True)
class ForestModel:
    trees: list
    n_classes: int
    n_features: int

    def predict(self, Xq) -> np.ndarray:
        return predict_rf(self, Xq)


def fit_tree(X, y, n_classes: int, rows=None, mtry: int | None = None,
             max_depth: int | None = None, min_leaf: int = 1, seed: int = 0) -> Tree:
    X, y, n_classes = _check_fit(X, y, n_classes)
    rows = np.arange(X.shape[0]) if rows is None else np.asarray(rows, dtype=np.int64)
    mtry = X.shape[1] if mtry is None else mtry
    f, t, lft, rgt, leaf, count = _tree.build_tree(
        np.ascontiguousarray(X.T), y, rows, n_classes, mtry, -1 if max_depth is None else max_depth, min_leaf, seed)
    return Tree(f[:count].copy(), t[:count].copy(), lft[:count].copy(), rgt[:count].copy(),
                leaf[:count].copy())


def fit_rf(X, y, n_trees: int = 100, max_depth: int | None = None, mtry: int | None = None,
           min_leaf: int = 1, seed: int = 0, bootstrap: bool = True,
           n_classes: int | None = None) -> ForestModel:
    X, y, n_classes = _check_fit(X, y, n_classes)
    n, p = X.shape
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    mtry = math.ceil(math.sqrt(p)) if mtry is None else mtry
    if not 1 <= mtry <= p:
        raise ValueError(f"mtry must lie in [1, {p}], got {mtry}")
    if min_leaf < 1:
        raise ValueError("min_leaf must be >= 1")
    # one child seed per tree, so trees are independent of training order
    seeds = np.random.SeedSequence(seed).spawn(n_trees)
    trees = []
    for ss in seeds:
        rng = np.random.default_rng(ss)
        rows = rng.integers(n, size=n) if bootstrap else np.arange(n)
        tree_seed = int(rng.integers(2 ** 31 - 1))
        trees.append(fit_tree(X, y, n_classes, rows, mtry, max_depth, min_leaf, tree_seed))
    return ForestModel(trees, n_classes, p)


def predict_rf(model: ForestModel, Xq) -> np.ndarray:
    Xq = _check_query(Xq, model.n_features)
    votes = np.zeros((Xq.shape[0], model.n_classes), dtype=np.int64)
    rows = np.arange(Xq.shape[0])
    for tree in model.trees:
        votes[rows, tree.predict(Xq)] += 1
    return np.argmax(votes, axis=1)


# ---------------------------------------------------------------- uniform entry point

DEFAULT_PARAMS = {
    "knn": {"k": 5},
    "svm": {"C": 1.0, "epochs": 100, "batch_size": 64},
    "rf": {"n_trees": 100, "max_depth": None, "mtry": None, "min_leaf": 1},
}


@dataclass(frozen=True)
class ClassifierSpec:
    """Named classifier plus hyperparameters; ``fit`` returns a model with ``predict``."""

    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in CLASSIFIERS:
            raise ValueError(f"unknown classifier {self.name!r}")

    def fit(self, X, y, n_classes: int, seed: int = 0):
        params = {**DEFAULT_PARAMS[self.name], **self.params}
        if self.name == "knn":
            return fit_knn(X, y, n_classes=n_classes, k=min(params["k"], len(y)))
        if self.name == "svm":
            return fit_svm(X, y, n_classes=n_classes, seed=seed, **params)
        return fit_rf(X, y, n_classes=n_classes, seed=seed, **params)
