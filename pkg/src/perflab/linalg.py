"""Least-squares solver shared by the linear and polynomial model families."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np


class MinNormSolution(NamedTuple):
    weights: np.ndarray
    rank: int
    rank_deficient: bool
    singular_values: np.ndarray


def ols_minimum_norm(design, targets) -> MinNormSolution:
    """Minimum-Euclidean-norm least-squares solution of ``design @ w ~ targets``.

    Uses the SVD-based LAPACK driver behind ``numpy.linalg.lstsq``.  Singular
    values below ``eps * max(n, cols) * s_max`` are treated as zero, which is
    also the threshold used to report rank deficiency.
    """
    A = np.asarray(design, dtype=float)
    b = np.asarray(targets, dtype=float)
    if A.ndim != 2:
        raise ValueError("design must be a 2-d array")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise ValueError("design and targets must be finite")
    n, cols = A.shape
    rcond = np.finfo(float).eps * max(n, cols)
    weights, _, rank, sv = np.linalg.lstsq(A, b, rcond=rcond)
    return MinNormSolution(weights, int(rank), int(rank) < cols, sv)


def with_intercept(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return np.column_stack([np.ones(X.shape[0]), X])
