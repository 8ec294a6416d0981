from typing import Literal, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel
from scipy.stats import rankdata

from ..errors import ShapeMismatchError, UndefinedRateError

REPORT_VERSION = 1

ArrayLike = Union[np.ndarray, Sequence[float]]


class ConfusionCounts(BaseModel):
    tp: int
    fn: int
    fp: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn


class ConfusionMetrics(BaseModel):
    accuracy: float
    tp_rate: float
    fp_rate: float
    counts: ConfusionCounts


class RocPoint(BaseModel):
    threshold: Optional[float]
    """Scores >= threshold are accepted as on-body. None stands for +inf (nothing accepted)"""
    fp_rate: float
    tp_rate: float


class MotionBreakdown(BaseModel):
    count: int
    accuracy: float
    tp_rate: Optional[float] = None
    """None when the motion has no on-body samples"""
    fp_rate: Optional[float] = None
    """None when the motion has no off-body samples"""


class EvalReport(BaseModel):
    report_version: Literal[1] = REPORT_VERSION
    threshold: float
    accuracy: float
    tp_rate: float
    fp_rate: float
    counts: ConfusionCounts
    roc_points: list[RocPoint]
    auroc: float
    per_motion: dict[str, MotionBreakdown] = {}


def _prepare(scores: ArrayLike, labels: ArrayLike) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(np.int64)
    if s.ndim != 1 or s.shape != y.shape:
        raise ShapeMismatchError(f"{s.shape[0] if s.ndim else 0} scores vs {y.size} labels")
    if s.size == 0:
        raise UndefinedRateError("No samples to evaluate")
    if np.any((y != 0) & (y != 1)):
        raise ShapeMismatchError("Labels must be 1 (on-body) or 0 (off-body)")
    return s, y


def confusion_counts(scores: ArrayLike, labels: ArrayLike, threshold: float = 0.5) -> ConfusionCounts:
    s, y = _prepare(scores, labels)
    accepted = s >= threshold
    on = y == 1
    return ConfusionCounts(
        tp=int(np.sum(accepted & on)),
        fn=int(np.sum(~accepted & on)),
        fp=int(np.sum(accepted & ~on)),
        tn=int(np.sum(~accepted & ~on)),
    )


def confusion_metrics(
    scores: ArrayLike, labels: ArrayLike, threshold: float = 0.5
) -> ConfusionMetrics:
    """Accuracy, TP rate (accepted on-body) and FP rate (accepted off-body). On-body iff score >= threshold"""
    c = confusion_counts(scores, labels, threshold)
    if c.tp + c.fn == 0:
        raise UndefinedRateError("TP rate is undefined without on-body samples")
    if c.fp + c.tn == 0:
        raise UndefinedRateError("FP rate is undefined without off-body samples")
    return ConfusionMetrics(
        accuracy=(c.tp + c.tn) / c.total,
        tp_rate=c.tp / (c.tp + c.fn),
        fp_rate=c.fp / (c.fp + c.tn),
        counts=c,
    )


def roc_curve(scores: ArrayLike, labels: ArrayLike) -> list[RocPoint]:
    """Threshold sweep from +inf down to the lowest score, one point per distinct score"""
    s, y = _prepare(scores, labels)
    n_on = int(y.sum())
    n_off = int(y.size - n_on)
    if n_on == 0 or n_off == 0:
        raise UndefinedRateError("ROC needs both on-body and off-body samples")
    order = np.argsort(-s, kind="mergesort")
    s_sorted = s[order]
    tp_cum = np.cumsum(y[order])
    fp_cum = np.cumsum(1 - y[order])
    # last index of every run of tied scores
    ends = np.flatnonzero(np.r_[s_sorted[1:] != s_sorted[:-1], True])
    points = [RocPoint(threshold=None, fp_rate=0.0, tp_rate=0.0)]
    points += [
        RocPoint(
            threshold=float(s_sorted[i]),
            fp_rate=float(fp_cum[i]) / n_off,
            tp_rate=float(tp_cum[i]) / n_on,
        )
        for i in ends
    ]
    return points


def auroc(points: Sequence[RocPoint]) -> float:
    """Trapezoidal area under the polyline"""
    fp = np.array([p.fp_rate for p in points])
    tp = np.array([p.tp_rate for p in points])
    return float(np.sum(np.diff(fp) * (tp[1:] + tp[:-1]) / 2))


def auroc_rank(scores: ArrayLike, labels: ArrayLike) -> float:
    """Normalized Mann-Whitney U, ties count half"""
    s, y = _prepare(scores, labels)
    n_on = int(y.sum())
    n_off = int(y.size - n_on)
    if n_on == 0 or n_off == 0:
        raise UndefinedRateError("AUROC needs both on-body and off-body samples")
    ranks = rankdata(s)
    u = ranks[y == 1].sum() - n_on * (n_on + 1) / 2
    return float(u / (n_on * n_off))
