"""Confusion counting and change-detection scores (F1, precision, recall, OA, kappa, IoU)."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.tn + other.tn,
                               self.fp + other.fp, self.fn + other.fn)

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class MetricsReport:
    f1: float
    precision: float
    recall: float
    oa: float
    kappa: float
    iou: float
    tp: int
    tn: int
    fp: int
    fn: int
    # set when the ground truth holds no positives and F1 falls back to the sentinel
    degenerate: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        d = self.to_dict()
        return json.dumps({k: d[k] for k in JSON_KEYS}, indent=2)


JSON_KEYS = ("f1", "precision", "recall", "oa", "kappa", "iou", "tp", "tn", "fp", "fn")


def _as_binary(a, name):
    a = np.asarray(a)
    if a.dtype != bool:
        if not np.isin(a, (0, 1)).all():
            raise ValueError(f"{name} must be binary")
        a = a.astype(bool)
    return a


def confusion(pred, gt) -> ConfusionCounts:
    """Count TP/TN/FP/FN between two binary maps of equal shape."""
    pred = _as_binary(pred, "pred")
    gt = _as_binary(gt, "gt")
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs gt {gt.shape}")
    tp = int(np.count_nonzero(pred & gt))
    fp = int(np.count_nonzero(pred & ~gt))
    fn = int(np.count_nonzero(~pred & gt))
    tn = int(pred.size - tp - fp - fn)
    return ConfusionCounts(tp, tn, fp, fn)


def f1_from_pr(precision: float, recall: float) -> float:
    if precision <= 0 or recall <= 0:
        return 0.0
    return 2.0 / (1.0 / precision + 1.0 / recall)


def report(counts: ConfusionCounts) -> MetricsReport:
    """Compute the six scores from accumulated counts.

    Sentinel policy for empty denominators: precision (recall) is 0 when
    TP+FP (TP+FN) is 0; F1 and IoU are 1 when the ground truth has no
    positives and nothing was predicted positive (``degenerate`` is set);
    kappa is 1 if OA is 1 and 0 otherwise when the chance agreement is 1.
    """
    tp, tn, fp, fn = counts.tp, counts.tn, counts.fp, counts.fn
    n = tp + tn + fp + fn
    if n == 0:
        raise ValueError("no pixels counted")
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    degenerate = tp + fn == 0
    if degenerate and fp == 0:
        f1 = iou = 1.0
    else:
        f1 = f1_from_pr(precision, recall)
        iou = tp / (tp + fn + fp)
    oa = (tp + tn) / n
    chance = ((tp + fn) * (tp + fp) + (tn + fp) * (tn + fn)) / (n * n)
    if chance == 1.0:
        kappa = 1.0 if oa == 1.0 else 0.0
    else:
        kappa = (oa - chance) / (1.0 - chance)
    return MetricsReport(f1, precision, recall, oa, kappa, iou, tp, tn, fp, fn, degenerate)


def evaluate_maps(preds, gts) -> MetricsReport:
    """Micro-averaged report over paired sequences of binary maps."""
    total = ConfusionCounts()
    for p, g in zip(preds, gts):
        total = total + confusion(p, g)
    return report(total)


CSV_FIELDS = ("name",) + JSON_KEYS


def reports_to_csv(rows: list[tuple[str, MetricsReport]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for name, r in rows:
        d = r.to_dict()
        w.writerow([name] + [_fmt(d[k]) for k in JSON_KEYS])
    return buf.getvalue()


def _fmt(v):
    return f"{v:.4f}" if isinstance(v, float) else str(v)
