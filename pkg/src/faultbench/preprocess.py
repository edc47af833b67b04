"""Column-wise min-max scaling fitted on training rows."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Normalizer:
    col_min: np.ndarray
    col_max: np.ndarray

    @property
    def n_features(self) -> int:
        return self.col_min.shape[0]

    def transform(self, X: np.ndarray) -> np.ndarray:
        return transform_minmax(self, X)


def fit_minmax(X: np.ndarray) -> Normalizer:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError(f"need a non-empty 2-D matrix, got shape {X.shape}")
    return Normalizer(X.min(axis=0), X.max(axis=0))


def transform_minmax(norm: Normalizer, X: np.ndarray) -> np.ndarray:
    """Affine map to the fitted [0, 1] range; constant columns map to 0, no clamping."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != norm.n_features:
        raise ValueError(f"expected {norm.n_features} columns, got shape {X.shape}")
    span = norm.col_max - norm.col_min
    const = span == 0
    out = (X - norm.col_min) / np.where(const, 1.0, span)
    out[:, const] = 0.0
    return out
