"""Multiclass classification metrics via one-vs-rest confusion counts.

Macro scores average per-class precision/recall first; F1 is the harmonic
mean of the macro precision and macro recall, not the mean of per-class F1.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .model import MetricsRecord


def confusion_counts(y_true, y_pred, n_classes: int):
    """One-vs-rest (tp, fp, fn, tn) per class, each an int64 array."""
    yt = np.asarray(y_true, dtype=np.int64)
    yp = np.asarray(y_pred, dtype=np.int64)
    if yt.ndim != 1 or yp.ndim != 1:
        raise ValidationError("label arrays must be one-dimensional")
    if yt.shape[0] != yp.shape[0]:
        raise ValidationError(
            f"label length mismatch: {yt.shape[0]} true vs {yp.shape[0]} predicted"
        )
    if yt.shape[0] == 0:
        raise ValidationError("cannot score an empty prediction set")
    if n_classes < 1:
        raise ValidationError("n_classes must be positive")
    for name, arr in (("true", yt), ("predicted", yp)):
        if arr.min() < 0 or arr.max() >= n_classes:
            raise ValidationError(
                f"{name} labels outside [0, {n_classes}): "
                f"saw range [{arr.min()}, {arr.max()}]"
            )
    n = yt.shape[0]
    tp = np.zeros(n_classes, dtype=np.int64)
    fp = np.zeros(n_classes, dtype=np.int64)
    fn = np.zeros(n_classes, dtype=np.int64)
    for c in range(n_classes):
        tp[c] = int(np.sum((yt == c) & (yp == c)))
        fp[c] = int(np.sum((yt != c) & (yp == c)))
        fn[c] = int(np.sum((yt == c) & (yp != c)))
    tn = n - tp - fp - fn
    return tp, fp, fn, tn


def metrics_from_counts(tp, fp, fn, tn) -> MetricsRecord:
    tp = np.asarray(tp, dtype=np.int64)
    fp = np.asarray(fp, dtype=np.int64)
    fn = np.asarray(fn, dtype=np.int64)
    tn = np.asarray(tn, dtype=np.int64)
    if not (tp.shape == fp.shape == fn.shape == tn.shape) or tp.ndim != 1:
        raise ValidationError("count arrays must share a single 1-d shape")
    if min(tp.min(), fp.min(), fn.min(), tn.min()) < 0:
        raise ValidationError("confusion counts must be non-negative")
    totals = tp + fp + fn + tn
    if np.unique(totals).size != 1:
        raise ValidationError("inconsistent confusion counts: per-class sums differ")
    n = int(totals[0])
    if n == 0:
        raise ValidationError("confusion counts describe zero samples")

    k = tp.shape[0]
    precisions = np.zeros(k, dtype=np.float64)
    recalls = np.zeros(k, dtype=np.float64)
    for c in range(k):
        denom_p = tp[c] + fp[c]
        denom_r = tp[c] + fn[c]
        precisions[c] = tp[c] / denom_p if denom_p > 0 else 0.0
        recalls[c] = tp[c] / denom_r if denom_r > 0 else 0.0
    precision = float(np.mean(precisions))
    recall = float(np.mean(recalls))
    f1 = 2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    accuracy = float(tp.sum()) / float(n)
    return MetricsRecord(
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f1=f1,
        tp=tuple(int(v) for v in tp),
        fp=tuple(int(v) for v in fp),
        fn=tuple(int(v) for v in fn),
        tn=tuple(int(v) for v in tn),
    )


def score_predictions(y_true, y_pred, n_classes: int) -> MetricsRecord:
    return metrics_from_counts(*confusion_counts(y_true, y_pred, n_classes))


def macro_f1(y_true, y_pred, n_classes: int) -> float:
    return score_predictions(y_true, y_pred, n_classes).f1


def mean_record(records) -> MetricsRecord:
    """Arithmetic mean of the four scores; counts are summed."""
    records = list(records)
    if not records:
        raise ValidationError("cannot average an empty list of records")
    k = len(records[0].tp)
    summed = {
        name: tuple(
            int(sum(getattr(r, name)[c] for r in records)) for c in range(k)
        )
        for name in ("tp", "fp", "fn", "tn")
    }
    return MetricsRecord(
        accuracy=float(np.mean([r.accuracy for r in records])),
        precision=float(np.mean([r.precision for r in records])),
        recall=float(np.mean([r.recall for r in records])),
        f1=float(np.mean([r.f1 for r in records])),
        **summed,
    )
