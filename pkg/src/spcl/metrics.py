"""Confusion counts and support-weighted F1."""
from __future__ import annotations

import numpy as np

from .errors import StructuralError


def confusion_matrix(predictions, golds, n_classes: int | None = None) -> np.ndarray:
    """Counts indexed ``[gold, predicted]``."""
    p = np.asarray(predictions, dtype=np.int64).reshape(-1)
    g = np.asarray(golds, dtype=np.int64).reshape(-1)
    if p.size != g.size:
        raise StructuralError(f"{p.size} predictions vs {g.size} golds")
    size = max(int(p.max(initial=-1)), int(g.max(initial=-1))) + 1
    size = max(size, n_classes or 0)
    cm = np.zeros((size, size), dtype=np.int64)
    np.add.at(cm, (g, p), 1)
    return cm


def weighted_f1(predictions, golds) -> float:
    """Per-class F1 averaged with weights proportional to gold support.

    Classes with zero gold support carry zero weight.
    """
    g = np.asarray(golds)
    if g.size == 0:
        raise StructuralError("weighted F1 of an empty set is undefined")
    cm = confusion_matrix(predictions, golds)
    tp = np.diag(cm).astype(np.float64)
    support = cm.sum(axis=1).astype(np.float64)
    predicted = cm.sum(axis=0).astype(np.float64)
    denom = support + predicted
    f1 = np.divide(2.0 * tp, denom, out=np.zeros_like(tp), where=denom > 0)
    return float(np.dot(f1, support) / support.sum())
