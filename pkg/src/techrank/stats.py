"""Rank statistics and rescaling helpers."""
from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from .exceptions import UndefinedCorrelationError

__all__ = ["normalize_minmax", "spearman", "competition_rank"]


def normalize_minmax(v) -> np.ndarray:
    """Affine map of ``v`` onto [0, 1]; a constant vector maps to zeros."""
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("cannot normalize an empty vector")
    lo = v.min()
    spread = v.max() - lo
    if spread == 0:
        return np.zeros_like(v)
    return (v - lo) / spread


def spearman(x, y) -> float:
    """Spearman rank correlation with average ranks for ties.

    Raises
    ------
    UndefinedCorrelationError
        If lengths differ, fewer than two observations are given, or either
        input is constant (zero rank variance).
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise UndefinedCorrelationError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise UndefinedCorrelationError("need at least two observations")
    rx = rankdata(x) - (x.size + 1) / 2.0
    ry = rankdata(y) - (y.size + 1) / 2.0
    sxx = rx @ rx
    syy = ry @ ry
    if sxx == 0 or syy == 0:
        raise UndefinedCorrelationError("correlation undefined for a constant vector")
    rho = (rx @ ry) / np.sqrt(sxx * syy)
    return float(min(1.0, max(-1.0, rho)))


def competition_rank(weights) -> np.ndarray:
    """Rank 1 for the largest weight; ties share the smallest rank ("1224")."""
    w = np.asarray(weights, dtype=np.float64)
    return rankdata(-w, method="min").astype(np.int64)
