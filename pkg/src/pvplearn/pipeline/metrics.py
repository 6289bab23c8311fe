"""Ranking metrics and score-matrix ensembling.

Average precision is the plain rank-based form: items sorted by
descending score (ties broken by original index), precision read off at
every relevant rank, averaged over the number of relevant items. No
interpolation.
"""

from __future__ import annotations

import logging

import numpy as np

from ..errors import ContractError, ParameterError, ShapeError

__all__ = ["average_precision", "evaluate_map", "ensemble_scores"]

logger = logging.getLogger(__name__)


def average_precision(scores: np.ndarray, relevance: np.ndarray) -> float:
    """AP of one ranking; relevance is binary with at least one positive."""
    scores = np.asarray(scores, dtype=np.float64)
    relevance = np.asarray(relevance)
    if scores.ndim != 1 or scores.shape != relevance.shape:
        raise ShapeError(
            f"scores {scores.shape} and relevance {relevance.shape} must be "
            "matching 1-D arrays"
        )
    rel = relevance > 0
    npos = int(rel.sum())
    if npos == 0:
        raise ContractError("relevance has no positive items")
    order = np.argsort(-scores, kind="stable")
    hits = rel[order]
    ranks = np.arange(1, len(scores) + 1)
    precision_at = np.cumsum(hits) / ranks
    return float(precision_at[hits].sum() / npos)


def evaluate_map(
    scores: np.ndarray,
    labels: np.ndarray,
    skip_empty: bool = True,
) -> tuple[float, list[float | None]]:
    """Mean AP over classes of a (n_items, n_classes) score matrix.

    Classes without a single positive item are skipped with a warning
    (their per-class slot is None); with skip_empty=False they raise
    instead. At least one class must be evaluable.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.ndim != 2 or scores.shape != labels.shape:
        raise ShapeError(
            f"scores {scores.shape} and labels {labels.shape} must be "
            "matching 2-D arrays"
        )
    per_class: list[float | None] = []
    values: list[float] = []
    for j in range(scores.shape[1]):
        if not (labels[:, j] > 0).any():
            if not skip_empty:
                raise ContractError(f"class {j} has no positive items")
            logger.warning("class %d has no positive items; skipped", j)
            per_class.append(None)
            continue
        ap = average_precision(scores[:, j], labels[:, j])
        per_class.append(ap)
        values.append(ap)
    if not values:
        raise ContractError("no class had positive items")
    return float(np.mean(values)), per_class


def ensemble_scores(a: np.ndarray, b: np.ndarray, weight: float = 0.5) -> np.ndarray:
    """weight * norm(a) + (1 - weight) * norm(b), min-max per matrix.

    A constant matrix normalizes to all zeros (it carries no ranking
    information).
    """
    if not 0.0 <= weight <= 1.0:
        raise ParameterError(f"weight must lie in [0, 1], got {weight}")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2:
        raise ShapeError(f"matrices must share a 2-D shape, got {a.shape} and {b.shape}")

    def minmax(m: np.ndarray) -> np.ndarray:
        lo, hi = m.min(), m.max()
        if hi == lo:
            return np.zeros_like(m)
        return (m - lo) / (hi - lo)

    return weight * minmax(a) + (1.0 - weight) * minmax(b)
