"""Ordinary least squares fitted in closed form.

The fit solves the normal equations ``(A^T A) w = A^T y`` with ``A`` the
design matrix plus an intercept column, using Gaussian elimination with
partial pivoting.  A vanishing pivot means the Gram matrix is rank
deficient; the error names the feature whose column collapsed so the
caller can drop or repair it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError, SingularMatrixError


@dataclass
class LRParams:
    coefficients: np.ndarray  # (k,)
    intercept: float
    feature_names: list[str]


def lr_parameter_count(n_features: int) -> int:
    """One weight per feature plus the intercept."""
    return n_features + 1


def _solve_pivoted(G: np.ndarray, b: np.ndarray, names: list[str]) -> np.ndarray:
    """Solve ``G w = b`` by elimination with partial pivoting.

    Raises :class:`SingularMatrixError` naming the column whose pivot
    vanishes (relative to the largest Gram entry).
    """
    n = G.shape[0]
    A = np.hstack([G.astype(np.float64), b.reshape(n, 1).astype(np.float64)])
    tol = 1e-12 * max(np.abs(G).max(), 1.0)
    for col in range(n):
        pivot_row = col + int(np.argmax(np.abs(A[col:, col])))
        if abs(A[pivot_row, col]) <= tol:
            label = names[col] if col < len(names) else "intercept"
            raise SingularMatrixError(
                f"normal equations are singular at column {col} ({label}); "
                f"features are linearly dependent",
                column=col,
            )
        if pivot_row != col:
            A[[col, pivot_row]] = A[[pivot_row, col]]
        A[col] /= A[col, col]
        for row in range(n):
            if row != col and A[row, col] != 0.0:
                A[row] -= A[row, col] * A[col]
    return A[:, n]


def lr_fit(X: np.ndarray, y: np.ndarray, feature_names: list[str] | None = None) -> LRParams:
    """Least-squares coefficients and intercept for ``y ~ X``."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if X.ndim != 2:
        raise ShapeError(f"expected a 2-D design matrix, got shape {X.shape}")
    n, k = X.shape
    if y.shape[0] != n:
        raise ShapeError(f"X has {n} rows but y has {y.shape[0]}")
    if n <= k:
        raise ShapeError(f"need more samples than features: {n} rows for {k} features")
    names = list(feature_names) if feature_names is not None else [f"x{i}" for i in range(k)]
    A = np.hstack([X, np.ones((n, 1))])  # intercept column last
    w = _solve_pivoted(A.T @ A, A.T @ y, names)
    return LRParams(coefficients=w[:k], intercept=float(w[k]), feature_names=names)


def lr_predict(params: LRParams, X: np.ndarray) -> np.ndarray:
    """Predictions as an ``(n, 1)`` column."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.coefficients.shape[0]:
        raise ShapeError(
            f"design matrix shape {X.shape} does not match "
            f"{params.coefficients.shape[0]} coefficients"
        )
    return (X @ params.coefficients + params.intercept).reshape(-1, 1)
