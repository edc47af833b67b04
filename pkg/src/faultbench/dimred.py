"""PCA, regularized LDA, landmark classical MDS and subsampled LLE.

All four produce a :class:`Reducer` whose output columns are ordered by
importance, so ``transform(r, X, d)`` for any ``d <= r.d`` gives the same
result as refitting at dimension ``d``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.linalg

FORMAT_VERSION = 1
DR_METHODS = ("pca", "lda", "mds", "lle")


class RankError(ValueError):
    """Not enough distinct points for the requested embedding dimension."""


@dataclass(frozen=True)
class Reducer:
    kind: str
    d: int
    n_features: int
    mean: np.ndarray | None = None          # column means (pca, lda)
    components: np.ndarray | None = None    # p x d projection (pca, lda)
    eigenvalues: np.ndarray | None = None
    reference: np.ndarray | None = None     # landmarks (mds) or fitted subsample (lle)
    embedding: np.ndarray | None = None     # reference rows in the embedded space
    back_projection: np.ndarray | None = None  # mds: landmark pseudo-inverse, m x d
    offset: np.ndarray | None = None        # mds: mean squared landmark distance
    k: int | None = None
    reg: float | None = None
    info: dict = field(default_factory=dict)


def _fix_signs(V: np.ndarray) -> np.ndarray:
    """Flip columns so the largest-magnitude entry of each is positive."""
    if V.size == 0:
        return V
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def sq_distances(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    d = (A ** 2).sum(axis=1)[:, None] + (B ** 2).sum(axis=1)[None, :] - 2.0 * A @ B.T
    return np.maximum(d, 0.0)


def _as_2d(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {X.shape}")
    return X


# ---------------------------------------------------------------- PCA

def fit_pca(X, d: int) -> Reducer:
    X = _as_2d(X)
    n, p = X.shape
    if not 1 <= d <= min(n - 1, p):
        raise ValueError(f"d must lie in [1, {min(n - 1, p)}], got {d}")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / (n - 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1][:d]
    comps = _fix_signs(vecs[:, order])
    return Reducer("pca", d, p, mean=mean, components=comps,
                   eigenvalues=np.maximum(vals[order], 0.0))


# ---------------------------------------------------------------- LDA

def scatter_matrices(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mu = X.mean(axis=0)
    p = X.shape[1]
    Sw = np.zeros((p, p))
    Sb = np.zeros((p, p))
    for c in np.unique(y):
        Xc = X[y == c]
        mc = Xc.mean(axis=0)
        Z = Xc - mc
        Sw += Z.T @ Z
        diff = mc - mu
        Sb += Xc.shape[0] * np.outer(diff, diff)
    return Sw, Sb


def fit_lda(X, y, d: int, shrinkage: float = 1e-3) -> Reducer:
    """Directions solving S_b v = lam (S_w + shrinkage * tr(S_w)/p * I) v."""
    X = _as_2d(X)
    y = np.asarray(y)
    classes, counts = np.unique(y, return_counts=True)
    n_classes = classes.size
    if not 1 <= d <= n_classes - 1:
        raise ValueError(f"d must lie in [1, {n_classes - 1}] for {n_classes} classes, got {d}")
    if counts.min() < 2:
        raise ValueError("every class needs at least two rows")
    if not 0.0 <= shrinkage <= 1.0:
        raise ValueError("shrinkage must lie in [0, 1]")
    p = X.shape[1]
    Sw, Sb = scatter_matrices(X, y)
    Sw_reg = Sw + shrinkage * np.trace(Sw) / p * np.eye(p)
    try:
        L = scipy.linalg.cholesky(Sw_reg, lower=True)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("regularized within-class scatter is singular") from exc
    tmp = scipy.linalg.solve_triangular(L, Sb, lower=True)
    M = scipy.linalg.solve_triangular(L, tmp.T, lower=True)
    M = (M + M.T) / 2.0
    vals, U = np.linalg.eigh(M)
    order = np.argsort(vals)[::-1][:d]
    V = scipy.linalg.solve_triangular(L.T, U[:, order], lower=False)
    V /= np.linalg.norm(V, axis=0)
    return Reducer("lda", d, p, mean=X.mean(axis=0), components=_fix_signs(V),
                   eigenvalues=vals[order], info={"shrinkage": shrinkage})


# ---------------------------------------------------------------- MDS

def classical_mds(D2: np.ndarray, d: int, rel_tol: float = 1e-10):
    """Torgerson scaling of a squared-distance matrix.

    Returns ``(coords, eigenvalues, eigenvectors)``; eigenpairs at or below
    ``rel_tol`` times the largest are zeroed.
    """
    m = D2.shape[0]
    J = np.eye(m) - 1.0 / m
    B = -0.5 * J @ D2 @ J
    B = (B + B.T) / 2.0
    vals, vecs = scipy.linalg.eigh(B, subset_by_index=[m - d, m - 1])
    vals, vecs = vals[::-1], _fix_signs(vecs[:, ::-1])
    top = max(vals[0], 0.0)
    keep = vals > rel_tol * top
    vals = np.where(keep, vals, 0.0)
    return vecs * np.sqrt(vals), vals, vecs


def fit_mds(X, d: int, n_landmarks: int = 1000, seed: int = 0) -> Reducer:
    X = _as_2d(X)
    n, p = X.shape
    m = min(n_landmarks, n)
    if not 1 <= d <= m - 1:
        raise ValueError(f"need 1 <= d <= n_landmarks - 1 (d={d}, landmarks={m})")
    if m == n:
        idx = np.arange(n)
    else:
        idx = np.sort(np.random.default_rng(seed).choice(n, size=m, replace=False))
    L = X[idx]
    if np.unique(L, axis=0).shape[0] < d + 1:
        raise RankError(f"fewer than {d + 1} distinct landmarks")
    D2 = sq_distances(L, L)
    np.fill_diagonal(D2, 0.0)
    coords, vals, vecs = classical_mds(D2, d)
    with np.errstate(divide="ignore"):
        inv_sqrt = np.where(vals > 0, 1.0 / np.sqrt(np.where(vals > 0, vals, 1.0)), 0.0)
    return Reducer("mds", d, p, reference=L, embedding=coords, eigenvalues=vals,
                   back_projection=vecs * inv_sqrt, offset=D2.mean(axis=0),
                   info={"landmark_index": idx})


# ---------------------------------------------------------------- LLE

def _knn_indices(Q: np.ndarray, R: np.ndarray, k: int, exclude_self: bool) -> np.ndarray:
    out = np.empty((Q.shape[0], k), dtype=np.int64)
    for s in range(0, Q.shape[0], 512):
        d = sq_distances(Q[s:s + 512], R)
        if exclude_self:
            rows = np.arange(d.shape[0])
            d[rows, rows + s] = np.inf
        out[s:s + 512] = np.argsort(d, axis=1, kind="stable")[:, :k]
    return out


def lle_weights(X: np.ndarray, reference: np.ndarray, nbrs: np.ndarray, reg: float,
                block: int = 256) -> np.ndarray:
    """Reconstruction weights (rows sum to 1) of each X row from its neighbours."""
    if X.shape[0] > block:
        return np.vstack([lle_weights(X[s:s + block], reference, nbrs[s:s + block], reg, block)
                          for s in range(0, X.shape[0], block)])
    Z = reference[nbrs] - X[:, None, :]          # (n, k, p)
    G = np.einsum("nkp,njp->nkj", Z, Z)
    k = nbrs.shape[1]
    tr = np.trace(G, axis1=1, axis2=2)
    # zero-trace neighbourhoods (all identical points) still get a positive ridge
    ridge = np.where(tr > 0, reg * tr, reg)
    G = G + ridge[:, None, None] * np.eye(k)[None]
    w = np.linalg.solve(G, np.ones((X.shape[0], k, 1)))[..., 0]
    return w / w.sum(axis=1, keepdims=True)


def lle_cost_matrix(weights: np.ndarray, nbrs: np.ndarray) -> np.ndarray:
    n = weights.shape[0]
    W = np.zeros((n, n))
    np.put_along_axis(W, nbrs, weights, axis=1)
    IW = np.eye(n) - W
    return IW.T @ IW


def fit_lle(X, d: int, k: int = 12, reg: float = 1e-3, n_subsample: int = 1000,
            seed: int = 0) -> Reducer:
    X = _as_2d(X)
    n, p = X.shape
    if not 1 <= d < k:
        raise ValueError(f"need 1 <= d < k (d={d}, k={k})")
    m = min(n_subsample, n)
    if m < k + 1:
        raise ValueError(f"need at least k + 1 = {k + 1} fitted points, have {m}")
    if m == n:
        idx = np.arange(n)
    else:
        idx = np.sort(np.random.default_rng(seed).choice(n, size=m, replace=False))
    R = X[idx]
    nbrs = _knn_indices(R, R, k, exclude_self=True)
    w = lle_weights(R, R, nbrs, reg)
    M = lle_cost_matrix(w, nbrs)
    # lift the constant vector out of the bottom of the spectrum
    shift = np.abs(M).sum(axis=1).max() + 1.0
    vals, vecs = scipy.linalg.eigh(M + shift / m, subset_by_index=[0, d - 1])
    Y = _fix_signs(vecs) * np.sqrt(m)
    return Reducer("lle", d, p, reference=R, embedding=Y, eigenvalues=vals, k=k, reg=reg,
                   info={"subsample_index": idx})


# ---------------------------------------------------------------- common

def transform(r: Reducer, X, d: int | None = None) -> np.ndarray:
    """Embed rows of ``X`` with the first ``d`` (default all) output dimensions."""
    X = _as_2d(X)
    d = r.d if d is None else d
    if not 1 <= d <= r.d:
        raise ValueError(f"d must lie in [1, {r.d}], got {d}")
    if X.shape[1] != r.n_features:
        raise ValueError(f"expected {r.n_features} columns, got {X.shape[1]}")
    if X.shape[0] == 0:
        return np.zeros((0, d))
    if r.kind in ("pca", "lda"):
        return (X - r.mean) @ r.components[:, :d]
    if r.kind == "mds":
        delta = sq_distances(X, r.reference)
        return -0.5 * (delta - r.offset) @ r.back_projection[:, :d]
    if r.kind == "lle":
        nbrs = _knn_indices(X, r.reference, r.k, exclude_self=False)
        w = lle_weights(X, r.reference, nbrs, r.reg)
        return np.einsum("nk,nkd->nd", w, r.embedding[nbrs][:, :, :d])
    raise ValueError(f"unknown reducer kind {r.kind!r}")


def fit_reducer(kind: str, X, y, d: int, seed: int = 0, **params) -> Reducer:
    if kind == "pca":
        return fit_pca(X, d)
    if kind == "lda":
        return fit_lda(X, y, d, **params)
    if kind == "mds":
        return fit_mds(X, d, seed=seed, **params)
    if kind == "lle":
        return fit_lle(X, d, seed=seed, **params)
    raise ValueError(f"unknown reducer kind {kind!r}")


def max_dimension(kind: str, n: int, p: int, n_classes: int, **params) -> int:
    """Largest legal output dimension for a training set of shape (n, p)."""
    if kind == "pca":
        return min(n - 1, p)
    if kind == "lda":
        return n_classes - 1
    if kind == "mds":
        return min(params.get("n_landmarks", 1000), n) - 1
    if kind == "lle":
        return params.get("k", 12) - 1
    raise ValueError(f"unknown reducer kind {kind!r}")


_ARRAY_FIELDS = ("mean", "components", "eigenvalues", "reference", "embedding",
                 "back_projection", "offset")


def reducer_to_dict(r: Reducer) -> dict:
    doc = {"version": FORMAT_VERSION, "kind": r.kind, "d": r.d, "n_features": r.n_features,
           "k": r.k, "reg": r.reg}
    for name in _ARRAY_FIELDS:
        arr = getattr(r, name)
        if arr is not None:
            doc[name] = {"shape": list(arr.shape), "data": arr.ravel().tolist()}
    return doc


def reducer_from_dict(doc: dict) -> Reducer:
    if doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported reducer format version {doc.get('version')!r}")
    arrays = {name: np.asarray(doc[name]["data"], dtype=float).reshape(doc[name]["shape"])
              for name in _ARRAY_FIELDS if name in doc}
    return Reducer(doc["kind"], doc["d"], doc["n_features"], k=doc.get("k"),
                   reg=doc.get("reg"), **arrays)


def save_reducer(r: Reducer, path: str | Path) -> None:
    Path(path).write_text(json.dumps(reducer_to_dict(r)))


def load_reducer(path: str | Path) -> Reducer:
    return reducer_from_dict(json.loads(Path(path).read_text()))


def truncate(r: Reducer, d: int) -> Reducer:
    """Same reducer keeping only the first ``d`` output dimensions."""
    if not 1 <= d <= r.d:
        raise ValueError(f"d must lie in [1, {r.d}], got {d}")
    cut = lambda a: None if a is None else a[..., :d]
    return replace(r, d=d, components=cut(r.components), embedding=cut(r.embedding),
                   back_projection=cut(r.back_projection),
                   eigenvalues=None if r.eigenvalues is None else r.eigenvalues[:d])
