"""Rank statistics for comparing two scorings of the same candidates."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy.stats import rankdata


class LengthMismatch(ValueError):
    pass


def _pair(a: Sequence[float], b: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    x, y = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise LengthMismatch(f"length mismatch: {x.shape} vs {y.shape}")
    if x.size < 2:
        raise LengthMismatch("rank statistics need at least 2 items")
    return x, y


def spearman(a: Sequence[float], b: Sequence[float]) -> float:
    """Spearman's rho: the closed form when tie-free, Pearson on average ranks otherwise.

    Inputs may be ranks or raw scores; both are converted to ranks first.
    """
    x, y = _pair(a, b)
    rx, ry = rankdata(x), rankdata(y)
    n = x.size
    if len(np.unique(x)) == n and len(np.unique(y)) == n:
        d2 = math.fsum((rx - ry) ** 2)
        return 1.0 - 6.0 * d2 / (n * (n * n - 1))
    dx, dy = rx - rx.mean(), ry - ry.mean()
    den = math.sqrt(math.fsum(dx * dx) * math.fsum(dy * dy))
    # a constant vector has no ordering to agree with
    return 0.0 if den == 0 else math.fsum(dx * dy) / den


def kendall_tau(a: Sequence[float], b: Sequence[float]) -> float:
    """Kendall's tau-a: (concordant - discordant) / (n(n-1)/2). Tied pairs count as neither."""
    x, y = _pair(a, b)
    n = x.size
    i, j = np.triu_indices(n, 1)
    s = np.sign(x[j] - x[i]) * np.sign(y[j] - y[i])
    return float(s.sum()) / (n * (n - 1) / 2)


def _top(scores: np.ndarray, k: int) -> list[int]:
    # stable: equal scores resolve to the lower index
    return list(np.argsort(-scores, kind="stable")[:k])


def retained(low: Sequence[float], full: Sequence[float], k: int) -> bool:
    """True when the full-resolution best candidate is among the low-resolution top ``k``.

    For ``k=1`` this is "same best".
    """
    x, y = np.asarray(low, dtype=float), np.asarray(full, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise LengthMismatch(f"length mismatch: {x.shape} vs {y.shape}")
    if not 1 <= k <= x.size:
        raise LengthMismatch(f"k={k} needs at least k candidates, got {x.size}")
    return _top(y, 1)[0] in _top(x, k)


def topk_retention(scores_lowres: Sequence[Sequence[float]], scores_fullres: Sequence[Sequence[float]], k: int) -> float:
    """Fraction of trials whose full-resolution winner survives in the low-resolution top ``k``."""
    if len(scores_lowres) != len(scores_fullres):
        raise LengthMismatch(f"{len(scores_lowres)} low-res trials vs {len(scores_fullres)} full-res trials")
    if not scores_lowres:
        return 0.0
    hits = [retained(lo, hi, k) for lo, hi in zip(scores_lowres, scores_fullres)]
    return sum(hits) / len(hits)
