"""Feature rankers: ReliefF, InfFS, one-vs-rest LASSO, greedy MI, ordinal locality.

The MI ranker (relevance minus mean redundancy) and the ordinal-locality
ranker are classical stand-ins for the concrete-autoencoder MI selector and
UFSOL respectively.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .preprocess import fit_minmax, transform_minmax


@dataclass(frozen=True)
class FeatureRanking:
    order: np.ndarray
    scores: np.ndarray
    method: str
    info: dict = field(default_factory=dict)

    @classmethod
    def from_scores(cls, scores: np.ndarray, method: str, **info) -> "FeatureRanking":
        scores = np.asarray(scores, dtype=float)
        # descending score, ascending index on ties
        order = np.lexsort((np.arange(scores.size), -scores))
        return cls(order, scores, method, info)

    @property
    def n_features(self) -> int:
        return self.scores.size

    def to_csv(self, path: str | Path) -> None:
        rank = np.empty_like(self.order)
        rank[self.order] = np.arange(1, self.order.size + 1)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["feature", "score", "rank"])
            for j in range(self.scores.size):
                w.writerow([j, repr(float(self.scores[j])), int(rank[j])])


def select_top(r: FeatureRanking, k: int) -> np.ndarray:
    if not 1 <= k <= r.n_features:
        raise ValueError(f"k must lie in [1, {r.n_features}], got {k}")
    return r.order[:k].copy()


def _check_xy(X, y=None):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"X must be 2-D, got shape {X.shape}")
    if y is None:
        return X
    y = np.asarray(y)
    if y.shape != (X.shape[0],):
        raise ValueError("y length must match the number of rows of X")
    return X, y


# ---------------------------------------------------------------- ReliefF

def rank_relieff(X, y, n_iters: int | None = None, k: int = 10, seed: int = 0) -> FeatureRanking:
    X, y = _check_xy(X, y)
    n, p = X.shape
    classes, y_idx = np.unique(y, return_inverse=True)
    if classes.size < 2:
        raise ValueError("ReliefF needs at least two classes")
    n_iters = min(n, 200) if n_iters is None else n_iters
    if n_iters < 1 or k < 1:
        raise ValueError("n_iters and k must be >= 1")
    span = X.max(axis=0) - X.min(axis=0)
    scale = np.where(span > 0, 1.0 / np.where(span > 0, span, 1.0), 0.0)
    Xs = X * scale
    prior = np.bincount(y_idx) / n
    members = [np.flatnonzero(y_idx == c) for c in range(classes.size)]

    rng = np.random.default_rng(seed)
    picks = rng.choice(n, size=n_iters, replace=n_iters > n)
    w = np.zeros(p)
    for i in picks:
        diff = np.abs(Xs - Xs[i])
        dist = diff.sum(axis=1)
        ci = y_idx[i]
        for c, idx in enumerate(members):
            if c == ci:
                idx = idx[idx != i]
            if idx.size == 0:
                continue
            kk = min(k, idx.size)
            near = idx[np.lexsort((idx, dist[idx]))[:kk]]
            contrib = diff[near].mean(axis=0)
            if c == ci:
                w -= contrib
            else:
                w += prior[c] / (1.0 - prior[ci]) * contrib
    return FeatureRanking.from_scores(w / n_iters, "relief", n_iters=n_iters, k=k)


# ---------------------------------------------------------------- InfFS

def spectral_radius(A: np.ndarray, n_iter: int = 1000, tol: float = 1e-10) -> float:
    """Power-iteration estimate of the largest |eigenvalue| of a non-negative matrix."""
    v = np.ones(A.shape[0]) / np.sqrt(A.shape[0])
    lam = 0.0
    for _ in range(n_iter):
        w = A @ v
        norm = np.linalg.norm(w)
        if norm == 0:
            return 0.0
        w /= norm
        lam_new = float(w @ A @ w)
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            return abs(lam_new)
        v, lam = w, lam_new
    return abs(lam)


def inffs_affinity(X: np.ndarray, alpha: float = 0.5) -> np.ndarray:
    Xn = transform_minmax(fit_minmax(X), X)
    sigma = Xn.std(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.corrcoef(Xn, rowvar=False)
    corr = np.atleast_2d(corr)
    # a constant column is treated as fully redundant with everything
    corr = np.where(np.isfinite(corr), corr, 1.0)
    return alpha * np.maximum.outer(sigma, sigma) + (1.0 - alpha) * (1.0 - np.abs(corr))


def inffs_energy(A: np.ndarray, r: float) -> np.ndarray:
    """Sum over all path lengths >= 1 of (rA)^l, via (I - rA)^-1 - I."""
    eye = np.eye(A.shape[0])
    return np.linalg.solve(eye - r * A, eye) - eye


def rank_inffs(X, alpha: float = 0.5, r: float | None = None) -> FeatureRanking:
    X = _check_xy(X)
    if X.shape[1] < 2:
        raise ValueError("InfFS needs at least two features")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    A = inffs_affinity(X, alpha)
    rho = spectral_radius(A)
    if r is None:
        r = 0.9 / rho if rho > 0 else 1.0
    elif not 0.0 < r * rho < 1.0:
        raise ValueError(f"r={r} outside convergence region (0, 1/{rho:.6g})")
    S = inffs_energy(A, r)
    return FeatureRanking.from_scores(S.sum(axis=1), "inffs", alpha=alpha, r=r)


# ---------------------------------------------------------------- LASSO

def soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


@njit(cache=True)
def _cd_columns(G, diag, grad0, lam, tol, max_iter):
    """Coordinate descent per response column; each column stops on its own."""
    p, m = grad0.shape
    W = np.zeros((p, m))
    sweeps = np.zeros(m, np.int64)
    done = np.zeros(m, np.bool_)
    g = np.empty(p)
    for c in range(m):
        for i in range(p):
            g[i] = grad0[i, c]
        for it in range(1, max_iter + 1):
            max_delta = 0.0
            for j in range(p):
                if diag[j] == 0.0:
                    continue
                old = W[j, c]
                rho = g[j] + diag[j] * old
                a = abs(rho) - lam
                new = 0.0
                if a > 0.0:
                    new = (a if rho > 0.0 else -a) / diag[j]
                delta = new - old
                if delta != 0.0:
                    W[j, c] = new
                    for i in range(p):
                        g[i] -= G[i, j] * delta
                    if abs(delta) > max_delta:
                        max_delta = abs(delta)
            sweeps[c] = it
            if max_delta < tol:
                done[c] = True
                break
    return W, sweeps, done


def lasso_cd(X, Y, lam: float, tol: float = 1e-6, max_iter: int = 1000):
    """Cyclic coordinate descent for min ||Y - XW||^2/(2n) + lam * ||W||_1.

    ``Y`` may be a vector or an (n, m) matrix of independent responses; each
    response column is solved separately and stops when its largest
    coefficient change falls below ``tol``. Works on the Gram matrix, so a
    sweep costs O(p^2). Returns ``(W, n_sweeps, converged)`` with the sweep
    count of the slowest column.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    vector = Y.ndim == 1
    Y2 = Y[:, None] if vector else Y
    n = X.shape[0]
    G = np.ascontiguousarray(X.T @ X / n)
    grad = np.ascontiguousarray(X.T @ Y2 / n)
    W, sweeps, done = _cd_columns(G, np.diag(G).copy(), grad, float(lam), float(tol),
                                  int(max_iter))
    return (W[:, 0] if vector else W), int(sweeps.max()), bool(done.all())


def lasso_lambda_max(X, Y) -> float:
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    Y2 = Y[:, None] if Y.ndim == 1 else Y
    return float(np.abs(X.T @ Y2).max() / X.shape[0])


def _standardize(X):
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    live = sd > 1e-12 * np.maximum(1.0, np.abs(mu))
    return (X - mu) / np.where(live, sd, 1.0) * live


def lasso_design(X, y):
    """Standardized design and centered one-vs-rest indicator targets."""
    X, y = _check_xy(X, y)
    classes, y_idx = np.unique(y, return_inverse=True)
    Y = (y_idx[:, None] == np.arange(classes.size)[None, :]).astype(float)
    return _standardize(X), Y - Y.mean(axis=0)


def rank_lasso(X, y, lam: float | None = None, tol: float = 1e-4, max_iter: int = 1000,
               lam_ratio: float = 0.01) -> FeatureRanking:
    """Score = largest |coefficient| across one-vs-rest L1 fits.

    ``lam`` defaults to ``lam_ratio * lambda_max``.
    """
    Xs, Yc = lasso_design(X, y)
    lam_max = lasso_lambda_max(Xs, Yc)
    if lam is None:
        lam = lam_ratio * lam_max
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    W, sweeps, converged = lasso_cd(Xs, Yc, lam, tol, max_iter)
    if not converged:
        warnings.warn(f"LASSO did not converge in {max_iter} sweeps", RuntimeWarning)
    return FeatureRanking.from_scores(np.abs(W).max(axis=1), "lasso", lam=lam,
                                      sweeps=sweeps, converged=converged)


# ---------------------------------------------------------------- mutual information

def equal_frequency_bins(X, n_bins: int = 10) -> np.ndarray:
    X = _check_xy(X)
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    qs = np.linspace(0.0, 1.0, n_bins + 1)[1:-1]
    edges = np.quantile(X, qs, axis=0)  # (n_bins-1, p)
    codes = np.empty(X.shape, dtype=np.int64)
    for j in range(X.shape[1]):
        codes[:, j] = np.searchsorted(edges[:, j], X[:, j], side="right")
    return codes


def _mi_from_joint(joint: np.ndarray) -> np.ndarray:
    """MI in bits for a stack of joint count tables (..., a, b)."""
    total = joint.sum(axis=(-2, -1), keepdims=True)
    pxy = joint / total
    px = pxy.sum(axis=-1, keepdims=True)
    py = pxy.sum(axis=-2, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = pxy * np.log2(pxy / (px * py))
    return np.nansum(terms, axis=(-2, -1))


def mutual_information_codes(codes: np.ndarray, target: np.ndarray, n_a: int, n_b: int) -> np.ndarray:
    """MI of every column of ``codes`` (values < n_a) with ``target`` (values < n_b)."""
    n, p = codes.shape
    flat = codes * n_b + target[:, None] + (np.arange(p) * n_a * n_b)[None, :]
    joint = np.bincount(flat.ravel(), minlength=p * n_a * n_b).reshape(p, n_a, n_b)
    return _mi_from_joint(joint.astype(float))


def rank_mi(X, y, n_bins: int = 10, beta: float = 1.0, n_select: int | None = None) -> FeatureRanking:
    """Greedy relevance-minus-mean-redundancy selection on equal-frequency bins.

    ``order`` is the greedy pick order; ``scores`` hold the objective value at
    the step each feature was picked. Features beyond ``n_select`` follow,
    ordered by raw relevance.
    """
    X, y = _check_xy(X, y)
    p = X.shape[1]
    codes = equal_frequency_bins(X, n_bins)
    _, y_idx = np.unique(y, return_inverse=True)
    relevance = mutual_information_codes(codes, y_idx, n_bins, int(y_idx.max()) + 1)
    n_select = p if n_select is None else min(n_select, p)
    redundancy = np.zeros(p)
    remaining = np.ones(p, dtype=bool)
    order, scores = [], np.empty(p)
    for step in range(n_select):
        value = relevance - (beta * redundancy / step if step else 0.0)
        value = np.where(remaining, value, -np.inf)
        j = int(np.argmax(value))
        order.append(j)
        scores[j] = value[j]
        remaining[j] = False
        if step + 1 < n_select:
            redundancy += mutual_information_codes(codes, codes[:, j], n_bins, n_bins)
    rest = np.flatnonzero(remaining)
    rest = rest[np.lexsort((rest, -relevance[rest]))]
    scores[rest] = relevance[rest]
    return FeatureRanking(np.array(order + list(rest), dtype=np.int64), scores, "mi",
                          {"n_bins": n_bins, "beta": beta, "relevance": relevance})


# ---------------------------------------------------------------- ordinal locality

def sample_triplets(X, k: int, n_triplets: int, seed: int) -> np.ndarray:
    """Triplets (a, b, c) with b != c drawn from a's k nearest neighbours."""
    X = _check_xy(X)
    n = X.shape[0]
    if n < k + 2 or k < 2:
        raise ValueError(f"need k >= 2 and n >= k + 2 (n={n}, k={k})")
    rng = np.random.default_rng(seed)
    anchors = rng.integers(n, size=n_triplets)
    uniq, inv = np.unique(anchors, return_inverse=True)
    sq = (X ** 2).sum(axis=1)
    nbrs = np.empty((uniq.size, k), dtype=np.int64)
    for s in range(0, uniq.size, 256):
        a = uniq[s:s + 256]
        d = sq[a][:, None] + sq[None, :] - 2.0 * X[a] @ X.T
        d[np.arange(a.size), a] = np.inf
        nbrs[s:s + 256] = np.argsort(d, axis=1, kind="stable")[:, :k]
    pair = np.array([rng.choice(k, size=2, replace=False) for _ in range(n_triplets)])
    rows = nbrs[inv]
    b = rows[np.arange(n_triplets), pair[:, 0]]
    c = rows[np.arange(n_triplets), pair[:, 1]]
    return np.column_stack([anchors, b, c])


def rank_ufsol(X, k: int = 10, n_triplets: int = 2000, seed: int = 0,
               triplets: np.ndarray | None = None) -> FeatureRanking:
    """Fraction of neighbour triplets whose order each single feature preserves."""
    X = _check_xy(X)
    if triplets is None:
        triplets = sample_triplets(X, k, n_triplets, seed)
    a, b, c = triplets.T
    full = np.sign(np.linalg.norm(X[a] - X[b], axis=1) - np.linalg.norm(X[a] - X[c], axis=1))
    single = np.sign(np.abs(X[a] - X[b]) - np.abs(X[a] - X[c]))
    scores = (single == full[:, None]).mean(axis=0)
    return FeatureRanking.from_scores(scores, "ufsol", k=k, n_triplets=len(triplets))


FS_METHODS = ("inffs", "relief", "lasso", "ufsol", "mi")
