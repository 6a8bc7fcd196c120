"""ROC points and area under the curve."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np


@dataclass(frozen=True)
class RocPoint:
    threshold: float
    tpr: Fraction
    fpr: Fraction


def _check(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.ndim != 1 or s.shape != y.shape:
        raise ValueError("scores and labels must be 1-D and of equal length")
    if not np.isfinite(s).all():
        raise ValueError("scores must be finite")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    y = y.astype(np.int64)
    if y.sum() == 0 or y.sum() == len(y):
        raise ValueError("ROC needs at least one positive and one negative")
    return s, y


def roc_points(scores, labels) -> list[RocPoint]:
    """One point per unique score (predict positive when score >= threshold), plus (0, 0).

    Rates are exact fractions ``tp/(tp+fn)`` and ``fp/(fp+tn)``.
    """
    s, y = _check(scores, labels)
    P, N = int(y.sum()), int(len(y) - y.sum())
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    tp = np.cumsum(y)
    fp = np.cumsum(1 - y)
    # last index of each run of equal scores
    ends = np.r_[np.nonzero(np.diff(s))[0], len(s) - 1]
    pts = [RocPoint(float("inf"), Fraction(0), Fraction(0))]
    for i in ends:
        pts.append(RocPoint(float(s[i]), Fraction(int(tp[i]), P), Fraction(int(fp[i]), N)))
    return pts


def auc(points: list[RocPoint]) -> Fraction:
    """Trapezoidal area over fpr-sorted points, in exact arithmetic."""
    pts = sorted(points, key=lambda p: (p.fpr, p.tpr))
    area = Fraction(0)
    for a, b in zip(pts, pts[1:]):
        area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2
    return area


def roc_auc(scores, labels) -> float:
    return float(auc(roc_points(scores, labels)))


def confusion(pred, labels) -> tuple[int, int, int, int]:
    """``(tp, fp, tn, fn)`` for 0/1 predictions."""
    p = np.asarray(pred).astype(bool)
    y = np.asarray(labels).astype(bool)
    return int((p & y).sum()), int((p & ~y).sum()), int((~p & ~y).sum()), int((~p & y).sum())
