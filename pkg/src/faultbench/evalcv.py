"""Confusion matrices, macro metrics and stratified k-fold cross-validation."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Protocol

import numpy as np

from . import dimred, featsel
from .classify import ClassifierSpec
from .preprocess import fit_minmax, transform_minmax


def derive_seed(*parts) -> int:
    """Stable 31-bit seed from arbitrary identifiers."""
    text = "\x1f".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:4], "little") & 0x7FFFFFFF


# ---------------------------------------------------------------- metrics

def confusion(y_true, y_pred, n_classes: int) -> np.ndarray:
    """counts[i, j] = number of samples with true class i predicted as j."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred must have equal length")
    for arr in (y_true, y_pred):
        if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
            raise ValueError(f"labels must lie in [0, {n_classes})")
    flat = np.bincount(y_true * n_classes + y_pred, minlength=n_classes * n_classes)
    return flat.reshape(n_classes, n_classes)


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float
    accuracy: float


def f_measure(precision: float, recall: float) -> float:
    s = precision + recall
    return 2.0 * precision * recall / s if s > 0 else 0.0


def macro_metrics(cm) -> Metrics:
    """Macro precision (over predicted columns), macro recall (over true rows),
    their harmonic mean, and accuracy. Empty classes contribute 0."""
    cm = np.asarray(cm, dtype=float)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1] or cm.shape[0] == 0:
        raise ValueError("confusion matrix must be square and non-empty")
    total = cm.sum()
    if total <= 0:
        raise ValueError("confusion matrix has no samples")
    diag = np.diag(cm)
    pred = cm.sum(axis=0)
    true = cm.sum(axis=1)
    prec = np.divide(diag, pred, out=np.zeros_like(diag), where=pred > 0).mean()
    rec = np.divide(diag, true, out=np.zeros_like(diag), where=true > 0).mean()
    return Metrics(float(prec), float(rec), f_measure(float(prec), float(rec)),
                   float(diag.sum() / total))


# ---------------------------------------------------------------- folds

def stratified_kfold(y, k: int = 10, seed: int = 0) -> np.ndarray:
    """Fold id per sample; classes are shuffled then dealt round-robin.

    The dealing position carries over between classes so fold sizes stay
    balanced overall, not just per class.
    """
    y = np.asarray(y)
    if k < 2:
        raise ValueError("k must be >= 2")
    classes, counts = np.unique(y, return_counts=True)
    if counts.min() < k:
        bad = classes[np.argmin(counts)]
        raise ValueError(f"class {bad} has {counts.min()} members, fewer than k={k}")
    rng = np.random.default_rng(seed)
    folds = np.empty(y.shape[0], dtype=np.int64)
    start = 0
    for c in classes:
        idx = rng.permutation(np.flatnonzero(y == c))
        folds[idx] = (start + np.arange(idx.size)) % k
        start = (start + idx.size) % k
    return folds


# ---------------------------------------------------------------- pipelines

class Reduction(Protocol):
    name: str
    scope: str

    def fit(self, X, y, size: int, seed: int): ...
    def apply(self, fitted, X, size: int) -> np.ndarray: ...


@dataclass(frozen=True)
class FeatureSelection:
    """Rank on the training fold, keep the top ``size`` columns."""

    name: str
    params: dict = field(default_factory=dict)
    scope: str = "FS"

    def fit(self, X, y, size: int, seed: int):
        p = dict(self.params)
        if self.name == "relief":
            return featsel.rank_relieff(X, y, seed=seed, **p)
        if self.name == "inffs":
            return featsel.rank_inffs(X, **p)
        if self.name == "lasso":
            return featsel.rank_lasso(X, y, **p)
        if self.name == "mi":
            return featsel.rank_mi(X, y, n_select=p.pop("n_select", size), **p)
        if self.name == "ufsol":
            return featsel.rank_ufsol(X, seed=seed, **p)
        raise ValueError(f"unknown feature selector {self.name!r}")

    def apply(self, fitted, X, size: int) -> np.ndarray:
        return X[:, featsel.select_top(fitted, size)]


@dataclass(frozen=True)
class DimensionReduction:
    """Fit at dimension ``size`` and project; a fit at d_max serves every d <= d_max."""

    name: str
    params: dict = field(default_factory=dict)
    scope: str = "DR"

    def fit(self, X, y, size: int, seed: int):
        return dimred.fit_reducer(self.name, X, y, size, seed=seed, **self.params)

    def apply(self, fitted, X, size: int) -> np.ndarray:
        return dimred.transform(fitted, X, size)

    def max_size(self, n: int, p: int, n_classes: int) -> int:
        return dimred.max_dimension(self.name, n, p, n_classes, **self.params)


def make_reduction(name: str, params: dict | None = None):
    params = dict(params or {})
    if name in featsel.FS_METHODS:
        return FeatureSelection(name, params)
    if name in dimred.DR_METHODS:
        return DimensionReduction(name, params)
    raise ValueError(f"unknown reduction method {name!r}")


@dataclass(frozen=True)
class Pipeline:
    """min-max normalizer -> optional reduction to ``size`` -> classifier."""

    classifier: object               # anything with fit(X, y, n_classes, seed) -> model
    reduction: object | None = None  # FeatureSelection / DimensionReduction
    size: int | None = None


class FoldCache:
    """Per-fold fitted normalizer and reduction, shared across sizes and classifiers.

    A reduction fitted once at ``fit_size`` (the largest size that will be
    requested) serves every smaller size, because rankings are nested and
    reducer outputs are ordered.
    """

    def __init__(self, fit_size: int | None = None):
        self.fit_size = fit_size
        self._store: dict = {}

    def get(self, key, build):
        if key not in self._store:
            self._store[key] = build()
        return self._store[key]


@dataclass
class FoldResult:
    fold: int
    n_test: int
    precision: float
    recall: float
    f1: float
    accuracy: float
    confusion: np.ndarray


def run_fold(pipeline: Pipeline, X, y, train_idx, test_idx, n_classes: int, seed: int,
             fold: int = 0, cache: FoldCache | None = None) -> FoldResult:
    """Fit every stage on ``train_idx`` rows only, then score ``test_idx`` rows."""
    cache = cache or FoldCache()
    X_tr, y_tr = X[train_idx], y[train_idx]
    norm = cache.get(("norm", fold), lambda: fit_minmax(X_tr))
    Z_tr = transform_minmax(norm, X_tr)
    Z_te = transform_minmax(norm, X[test_idx])
    red = pipeline.reduction
    if red is not None:
        size = pipeline.size
        fit_size = max(size, cache.fit_size or size)
        red_seed = derive_seed(seed, "reduce", red.name, fold)
        fitted = cache.get(("red", red.name, fold),
                           lambda: red.fit(Z_tr, y_tr, fit_size, red_seed))
        Z_tr = red.apply(fitted, Z_tr, size)
        Z_te = red.apply(fitted, Z_te, size)
    clf_seed = derive_seed(seed, "classify", getattr(red, "name", "none"),
                           getattr(pipeline.classifier, "name", "custom"), fold)
    model = pipeline.classifier.fit(Z_tr, y_tr, n_classes, clf_seed)
    pred = model.predict(Z_te)
    cm = confusion(y[test_idx], pred, n_classes)
    m = macro_metrics(cm)
    return FoldResult(fold, len(test_idx), m.precision, m.recall, m.f1, m.accuracy, cm)


@dataclass
class EvalReport:
    """Fold-averaged metrics plus the summed confusion matrix.

    ``accuracy``/``precision``/``recall``/``f1`` are means over folds; the
    ``pooled`` metrics come from the summed confusion matrix.
    """

    accuracy: float
    precision: float
    recall: float
    f1: float
    per_fold: list
    confusion: np.ndarray
    combination: str = ""

    @property
    def pooled(self) -> Metrics:
        return macro_metrics(self.confusion)

    @classmethod
    def from_folds(cls, folds: list[FoldResult], combination: str = "") -> "EvalReport":
        mean = lambda attr: float(np.mean([getattr(f, attr) for f in folds]))
        per_fold = [{"fold": f.fold, "n_test": f.n_test, "accuracy": f.accuracy,
                     "precision": f.precision, "recall": f.recall, "f1": f.f1} for f in folds]
        cm = np.sum([f.confusion for f in folds], axis=0)
        return cls(mean("accuracy"), mean("precision"), mean("recall"), mean("f1"),
                   per_fold, cm, combination)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["confusion"] = self.confusion.tolist()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        d = dict(d)
        d["confusion"] = np.asarray(d["confusion"], dtype=np.int64)
        return cls(**d)

    def confusion_csv(self) -> str:
        l = self.confusion.shape[0]
        lines = ["true\\pred," + ",".join(str(j) for j in range(l))]
        lines += [f"{i}," + ",".join(str(int(v)) for v in row) for i, row in enumerate(self.confusion)]
        return "\n".join(lines) + "\n"


def cross_validate(pipeline: Pipeline, X, y, k: int = 10, seed: int = 0,
                   n_classes: int | None = None, folds: np.ndarray | None = None,
                   cache: FoldCache | None = None, combination: str = "") -> EvalReport:
    """Stratified k-fold evaluation; every fitted stage sees training rows only."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    n_classes = int(y.max()) + 1 if n_classes is None else n_classes
    if folds is None:
        folds = stratified_kfold(y, k, derive_seed(seed, "folds"))
    results = []
    for f in range(k):
        test_idx = np.flatnonzero(folds == f)
        train_idx = np.flatnonzero(folds != f)
        results.append(run_fold(pipeline, X, y, train_idx, test_idx, n_classes, seed, f, cache))
    return EvalReport.from_folds(results, combination)


def classifier(name: str, **params) -> ClassifierSpec:
    return ClassifierSpec(name, params)
