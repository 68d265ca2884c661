"""Evaluation metrics for binary window-state series.

Covers the confusion matrix and derived rates, F1, ROC/AUC, and the
behavioral indicators: fraction of time open, actions per day, and
open/closed sequence duration statistics. The open state is the positive
class throughout. Degenerate rates (0/0) are reported as ``None`` rather
than 0 so that aggregation over offices does not silently deflate.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import as_binary_vector, check_same_length

SECONDS_PER_HOUR = 3600.0
SECONDS_PER_DAY = 86400.0


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class Rates:
    acc: float | None
    tpr: float | None
    tnr: float | None
    fpr: float | None
    fnr: float | None
    f1: float | None


@dataclass(frozen=True)
class BehaviorSummary:
    fraction_open: float
    actions_per_day: float
    n_actions: int
    duration_days: float


@dataclass(frozen=True)
class SequenceStats:
    """Quantiles of gap-free state sequence durations, in hours."""

    count: int
    q25: float | None
    median: float | None
    q75: float | None

    @property
    def iqr(self) -> float | None:
        if self.q25 is None or self.q75 is None:
            return None
        return self.q75 - self.q25


@dataclass(frozen=True)
class DurationStats:
    open: SequenceStats
    closed: SequenceStats


def confusion(predicted, actual) -> ConfusionMatrix:
    """Count TP/FP/TN/FN with open (1) as the positive class."""
    p = as_binary_vector(predicted, "predicted")
    a = as_binary_vector(actual, "actual")
    check_same_length(p, a, "predicted", "actual")
    tp = int(np.sum((p == 1) & (a == 1)))
    fp = int(np.sum((p == 1) & (a == 0)))
    tn = int(np.sum((p == 0) & (a == 0)))
    fn = int(np.sum((p == 0) & (a == 1)))
    return ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn)


def _ratio(num: int, den: int) -> float | None:
    return num / den if den > 0 else None


def rates(cm: ConfusionMatrix) -> Rates:
    """Derive ACC, TPR, TNR, FPR, FNR and F1 = 2TP/(2TP+FP+FN).

    F1 is absent when the truth holds no positives at all (TP = FN = 0),
    matching the absent TPR, so office aggregates are not deflated.
    """
    f1 = None
    if cm.tp + cm.fn > 0:
        f1 = _ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn)
    return Rates(
        acc=_ratio(cm.tp + cm.tn, cm.total),
        tpr=_ratio(cm.tp, cm.tp + cm.fn),
        tnr=_ratio(cm.tn, cm.tn + cm.fp),
        fpr=_ratio(cm.fp, cm.fp + cm.tn),
        fnr=_ratio(cm.fn, cm.fn + cm.tp),
        f1=f1,
    )


def roc(probabilities, actual) -> tuple[np.ndarray, float | None]:
    """ROC points over all distinct-probability thresholds, plus trapezoid AUC.

    Returns an (m, 2) array of (FPR, TPR) points sorted ascending, beginning
    at (0, 0) and ending at (1, 1). Predictions at a threshold t use p >= t.
    With a single-class truth the curve is still returned and AUC is None.
    """
    p = np.asarray(probabilities, dtype=np.float64)
    a = as_binary_vector(actual, "actual")
    check_same_length(p, a, "probabilities", "actual")
    if p.ndim != 1:
        raise ValueError("probabilities must be 1-dimensional")
    if not np.all(np.isfinite(p)):
        raise ValueError("probabilities contain non-finite values")

    n_pos = int(np.sum(a == 1))
    n_neg = int(np.sum(a == 0))

    order = np.argsort(-p, kind="stable")
    p_sorted = p[order]
    a_sorted = a[order]
    tp_cum = np.cumsum(a_sorted == 1)
    fp_cum = np.cumsum(a_sorted == 0)
    # Keep one point per distinct probability (the last index of each group).
    distinct = np.r_[p_sorted[1:] != p_sorted[:-1], True]
    tps = tp_cum[distinct]
    fps = fp_cum[distinct]

    tpr = tps / n_pos if n_pos else np.zeros_like(tps, dtype=float)
    fpr = fps / n_neg if n_neg else np.zeros_like(fps, dtype=float)
    points = np.column_stack([np.r_[0.0, fpr], np.r_[0.0, tpr]])
    if points[-1, 0] != 1.0 or points[-1, 1] != 1.0:
        points = np.vstack([points, [1.0, 1.0]])
    # Sort by (FPR, TPR); the sweep already yields this order but make it explicit.
    idx = np.lexsort((points[:, 1], points[:, 0]))
    points = points[idx]

    if n_pos == 0 or n_neg == 0:
        return points, None
    auc = float(np.trapezoid(points[:, 1], points[:, 0]))
    return points, auc


def mann_whitney_auc(probabilities, actual) -> float | None:
    """Tie-corrected rank statistic; equals the trapezoid AUC."""
    p = np.asarray(probabilities, dtype=np.float64)
    a = as_binary_vector(actual, "actual")
    n_pos = int(np.sum(a == 1))
    n_neg = int(np.sum(a == 0))
    if n_pos == 0 or n_neg == 0:
        return None
    order = np.argsort(p, kind="stable")
    ranks = np.empty(len(p), dtype=np.float64)
    sorted_p = p[order]
    i = 0
    rank = 1
    while i < len(p):
        j = i
        while j + 1 < len(p) and sorted_p[j + 1] == sorted_p[i]:
            j += 1
        midrank = 0.5 * (rank + rank + (j - i))
        ranks[order[i : j + 1]] = midrank
        rank += j - i + 1
        i = j + 1
    rank_sum_pos = float(np.sum(ranks[a == 1]))
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def _segment_ids(timestamps: np.ndarray, cadence_s: float) -> np.ndarray:
    """Label gap-free segments; a delta > 2x the cadence starts a new one."""
    if len(timestamps) == 0:
        return np.array([], dtype=np.int64)
    breaks = np.diff(timestamps) > 2 * cadence_s
    return np.r_[0, np.cumsum(breaks)]


def behavior_summary(
    states,
    timestamps,
    cadence_min: float,
    count_closings: bool = False,
) -> BehaviorSummary:
    """Fraction of time open and actions per monitored day.

    Actions are opening transitions (0 -> 1) inside gap-free segments;
    ``count_closings`` adds 1 -> 0 transitions as well. The monitored
    duration is the number of points times the cadence, in days.
    """
    s = as_binary_vector(states, "states")
    ts = np.asarray(timestamps, dtype=np.int64)
    check_same_length(s, ts, "states", "timestamps")
    if len(s) == 0:
        raise ValueError("behavior_summary needs at least one state")
    if np.any(np.diff(ts) < 0):
        raise ValueError("timestamps must be non-decreasing")

    seg = _segment_ids(ts, cadence_min * 60.0)
    same_seg = seg[1:] == seg[:-1]
    opens = int(np.sum((s[:-1] == 0) & (s[1:] == 1) & same_seg))
    closes = int(np.sum((s[:-1] == 1) & (s[1:] == 0) & same_seg))
    actions = opens + closes if count_closings else opens

    duration_days = len(s) * cadence_min * 60.0 / SECONDS_PER_DAY
    return BehaviorSummary(
        fraction_open=float(np.mean(s)),
        actions_per_day=actions / duration_days,
        n_actions=actions,
        duration_days=duration_days,
    )


def _complete_sequences(
    states: np.ndarray, timestamps: np.ndarray, seg: np.ndarray, value: int
) -> list[tuple[int, float]]:
    """(start timestamp, duration hours) of complete runs of ``value``.

    A run is complete when it is bounded by opposite states on both sides
    within one gap-free segment; runs touching a stream boundary or a gap
    are discarded. Durations span the transition instants.
    """
    out = []
    n = len(states)
    i = 0
    while i < n:
        if states[i] != value:
            i += 1
            continue
        j = i
        while j + 1 < n and states[j + 1] == value and seg[j + 1] == seg[j]:
            j += 1
        # Complete iff an opposite-state neighbor exists on both sides in-segment.
        left_ok = i > 0 and seg[i - 1] == seg[i] and states[i - 1] != value
        right_ok = j + 1 < n and seg[j + 1] == seg[j] and states[j + 1] != value
        if left_ok and right_ok:
            hours = (timestamps[j + 1] - timestamps[i]) / SECONDS_PER_HOUR
            out.append((int(timestamps[i]), float(hours)))
        i = j + 1
    return out


def _sequence_stats(durations: list[float]) -> SequenceStats:
    if not durations:
        return SequenceStats(count=0, q25=None, median=None, q75=None)
    arr = np.asarray(durations, dtype=np.float64)
    q25, med, q75 = np.quantile(arr, [0.25, 0.5, 0.75])
    return SequenceStats(count=len(arr), q25=float(q25), median=float(med), q75=float(q75))


def duration_stats(states, timestamps, cadence_min: float) -> DurationStats:
    """Quantiles of complete open and closed sequence durations, in hours."""
    s = as_binary_vector(states, "states").astype(np.int64)
    ts = np.asarray(timestamps, dtype=np.int64)
    check_same_length(s, ts, "states", "timestamps")
    if len(s) == 0:
        raise ValueError("duration_stats needs at least one state")
    seg = _segment_ids(ts, cadence_min * 60.0)
    open_runs = _complete_sequences(s, ts, seg, 1)
    closed_runs = _complete_sequences(s, ts, seg, 0)
    return DurationStats(
        open=_sequence_stats([h for _, h in open_runs]),
        closed=_sequence_stats([h for _, h in closed_runs]),
    )


def complete_sequences(states, timestamps, cadence_min: float) -> list[tuple[str, int, float]]:
    """All complete sequences as (kind, start timestamp, hours) rows."""
    s = as_binary_vector(states, "states").astype(np.int64)
    ts = np.asarray(timestamps, dtype=np.int64)
    seg = _segment_ids(ts, cadence_min * 60.0)
    rows = [("open", t, h) for t, h in _complete_sequences(s, ts, seg, 1)]
    rows += [("closed", t, h) for t, h in _complete_sequences(s, ts, seg, 0)]
    rows.sort(key=lambda r: (r[1], r[0]))
    return rows
