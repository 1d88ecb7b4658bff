"""Confusion-based metrics, ROC AUC and the polygon area metric."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

# 3 * sqrt(3) / 2, the area of a unit-radius regular hexagon, as published
HEXAGON_AREA = 2.59807


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")
        if self.total == 0:
            raise ValueError("confusion counts must cover at least one subject")

    @property
    def total(self):
        return self.tp + self.tn + self.fp + self.fn

    @classmethod
    def from_predictions(cls, y_true, y_pred):
        """Positive class is 1 (depressed)."""
        t = np.asarray(y_true, dtype=int)
        p = np.asarray(y_pred, dtype=int)
        return cls(
            tp=int(np.sum((t == 1) & (p == 1))),
            tn=int(np.sum((t == 0) & (p == 0))),
            fp=int(np.sum((t == 0) & (p == 1))),
            fn=int(np.sum((t == 1) & (p == 0))),
        )


@dataclass
class MetricBlock:
    acc: float
    pre: float
    rec: float
    f1: float
    sp: float
    ji: float
    auc: float
    pam: float
    degenerate: list = field(default_factory=list)

    KEYS = ("acc", "pre", "rec", "f1", "sp", "ji", "auc", "pam")

    def to_dict(self):
        out = {k: float(getattr(self, k)) for k in self.KEYS}
        out["degenerate"] = sorted(self.degenerate)
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _ratio(num, den, name, flags):
    if den == 0:
        flags.append(name)
        return 0.0
    return num / den


def basic_metrics(c):
    """Acc, Pre, Rec, F1, SP, JI; zero denominators give 0 and are listed in the flags.

    Returns (dict of the six metrics, list of degenerate metric names).
    """
    flags = []
    acc = (c.tp + c.tn) / c.total
    pre = _ratio(c.tp, c.tp + c.fp, "pre", flags)
    rec = _ratio(c.tp, c.tp + c.fn, "rec", flags)
    f1 = _ratio(2 * pre * rec, pre + rec, "f1", flags)
    sp = _ratio(c.tn, c.tn + c.fp, "sp", flags)
    ji = _ratio(c.tp, c.tp + c.fp + c.fn, "ji", flags)
    return {"acc": acc, "pre": pre, "rec": rec, "f1": f1, "sp": sp, "ji": ji}, flags


def roc_curve(scores, labels):
    """ROC points (fpr, tpr) sweeping the threshold over every distinct score, high to low."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=int)
    order = np.argsort(-scores, kind="mergesort")
    s, y = scores[order], labels[order]
    # last index of each block of tied scores
    cut = np.r_[np.flatnonzero(np.diff(s)), len(s) - 1]
    tps = np.cumsum(y)[cut]
    fps = np.cumsum(1 - y)[cut]
    tpr = np.r_[0.0, tps / max(y.sum(), 1)]
    fpr = np.r_[0.0, fps / max((1 - y).sum(), 1)]
    return fpr, tpr


def roc_auc(scores, labels):
    """Trapezoidal area under the ROC curve.

    Returns (auc, degenerate); with a single class in ``labels`` the area
    is undefined and (0.0, True) is returned.
    """
    labels = np.asarray(labels, dtype=int)
    if len(labels) == 0 or labels.min() == labels.max():
        return 0.0, True
    fpr, tpr = roc_curve(scores, labels)
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2)), False


def pam(acc, rec, sp, ji, f1, auc):
    """Polygon area metric over the six-axis radar of (Acc, Rec, SP, JI, F1, AUC)."""
    ring = (acc, rec, sp, ji, f1, auc)
    total = sum(ring[i] * ring[(i + 1) % 6] for i in range(6))
    return math.sqrt(3) * total / (4 * HEXAGON_AREA)


def evaluate(y_true, y_pred, scores):
    """Full metric block from labels, hard predictions and positive-class scores."""
    counts = ConfusionCounts.from_predictions(y_true, y_pred)
    basic, flags = basic_metrics(counts)
    auc, auc_degenerate = roc_auc(scores, y_true)
    if auc_degenerate:
        flags.append("auc")
    value = pam(basic["acc"], basic["rec"], basic["sp"], basic["ji"], basic["f1"], auc)
    return MetricBlock(auc=auc, pam=value, degenerate=flags, **basic)
