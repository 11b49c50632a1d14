"""Evaluation metrics."""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata


def mse(y_true, y_pred) -> float:
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    if y_true.size == 0:
        raise ValueError("mse of empty vectors")
    return float(np.mean((y_true - y_pred) ** 2))


def auc(y_true, scores) -> float:
    """ROC AUC via the Mann-Whitney rank statistic; tied scores count one half.

    Labels may be {-1, +1} or {0, 1}; the larger value is the positive class.
    """
    y_true = np.asarray(y_true)
    scores = np.asarray(scores, dtype=float)
    if y_true.shape != scores.shape:
        raise ValueError(f"length mismatch: {y_true.shape} vs {scores.shape}")
    classes = np.unique(y_true)
    if len(classes) != 2:
        raise ValueError(f"AUC needs exactly two classes, got {classes.tolist()}")
    pos = y_true == classes[1]
    n_pos = int(pos.sum())
    n_neg = len(y_true) - n_pos
    ranks = rankdata(scores, method="average")
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))
