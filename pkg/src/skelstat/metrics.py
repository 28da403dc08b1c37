"""Score evaluation: ROC, precision-recall, equal error rate.

Tied scores are processed as one threshold group, which makes the
trapezoidal AUC-ROC equal to the Mann-Whitney statistic with half-weight
ties. AUC-PR uses the step-wise area (no interpolation of precision).
The positive class is Anomalous throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .core import DataError, FeatureWindow, FrameLabel, Label, MetricsReport, ScoredFrame


@dataclass(frozen=True)
class CurvePoint:
    threshold: float
    x: float  # fpr (ROC) or recall (PR)
    y: float  # tpr (ROC) or precision (PR)


def _threshold_counts(samples: Sequence[ScoredFrame]) -> Tuple[np.ndarray, np.ndarray, np.ndarray, int, int]:
    """Distinct thresholds (descending) with cumulative TP/FP counts for the
    rule "predict positive when score >= threshold"."""
    if not samples:
        raise DataError("no samples to evaluate")
    scores = np.array([s.score for s in samples], dtype=np.float64)
    positive = np.array([s.label is Label.ANOMALOUS for s in samples], dtype=bool)
    n_pos = int(positive.sum())
    n_neg = len(samples) - n_pos
    order = np.argsort(-scores, kind="stable")
    scores = scores[order]
    positive = positive[order]
    distinct = np.nonzero(np.diff(scores))[0]
    last = np.r_[distinct, len(scores) - 1]
    tp = np.cumsum(positive)[last]
    fp = (last + 1) - tp
    return scores[last], tp.astype(np.int64), fp.astype(np.int64), n_pos, n_neg


def roc_curve(samples: Sequence[ScoredFrame]) -> List[CurvePoint]:
    """ROC points at every distinct threshold, from (0, 0) to (1, 1)."""
    thresholds, tp, fp, n_pos, n_neg = _threshold_counts(samples)
    if n_pos == 0 or n_neg == 0:
        raise DataError("ROC needs at least one positive and one negative sample")
    points = [CurvePoint(math.inf, 0.0, 0.0)]
    for t, tpc, fpc in zip(thresholds, tp, fp):
        points.append(CurvePoint(float(t), fpc / n_neg, tpc / n_pos))
    return points


def auc_roc(samples: Sequence[ScoredFrame]) -> float:
    """Trapezoidal area under the ROC curve."""
    points = roc_curve(samples)
    area = 0.0
    for prev, cur in zip(points, points[1:]):
        area += (cur.x - prev.x) * (cur.y + prev.y) / 2.0
    return area


def pr_curve(samples: Sequence[ScoredFrame]) -> List[CurvePoint]:
    """Precision/recall at every distinct threshold (recall on x)."""
    thresholds, tp, fp, n_pos, _ = _threshold_counts(samples)
    if n_pos == 0:
        raise DataError("PR curve needs at least one positive sample")
    return [
        CurvePoint(float(t), tpc / n_pos, tpc / (tpc + fpc))
        for t, tpc, fpc in zip(thresholds, tp, fp)
    ]


def auc_pr(samples: Sequence[ScoredFrame]) -> float:
    """Step-wise area under the precision-recall curve."""
    points = pr_curve(samples)
    area = 0.0
    prev_recall = 0.0
    for point in points:
        area += (point.x - prev_recall) * point.y
        prev_recall = point.x
    return area


def _rate_curves(samples: Sequence[ScoredFrame]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """FPR and FNR as functions of the threshold (descending), prefixed with
    a virtual all-negative point one unit above the top score."""
    thresholds, tp, fp, n_pos, n_neg = _threshold_counts(samples)
    if n_pos == 0 or n_neg == 0:
        raise DataError("both classes are needed to trade off FPR against FNR")
    fpr = np.r_[0.0, fp / n_neg]
    fnr = np.r_[1.0, 1.0 - tp / n_pos]
    thresholds = np.r_[thresholds[0] + 1.0, thresholds]
    return thresholds, fpr, fnr


def error_rates(
    samples: Sequence[ScoredFrame], threshold: float, interpolate: bool = False
) -> Tuple[float, float]:
    """(FPR, FNR) of the rule "positive when score >= threshold".

    With ``interpolate`` the rates are read off the linearly interpolated
    curves between adjacent distinct thresholds instead of direct counting.
    """
    if not interpolate:
        n_pos = sum(1 for s in samples if s.label is Label.ANOMALOUS)
        n_neg = len(samples) - n_pos
        if n_pos == 0 or n_neg == 0:
            raise DataError("both classes are needed to compute error rates")
        fp = sum(1 for s in samples if s.score >= threshold and s.label is Label.NORMAL)
        fn = sum(1 for s in samples if s.score < threshold and s.label is Label.ANOMALOUS)
        return fp / n_neg, fn / n_pos
    thresholds, fpr, fnr = _rate_curves(samples)
    if threshold >= thresholds[0]:
        return float(fpr[0]), float(fnr[0])
    if threshold <= thresholds[-1]:
        return float(fpr[-1]), float(fnr[-1])
    j = int(np.searchsorted(-thresholds, -threshold, side="left"))
    if thresholds[j] == threshold:
        return float(fpr[j]), float(fnr[j])
    alpha = (thresholds[j - 1] - threshold) / (thresholds[j - 1] - thresholds[j])
    return (
        float(fpr[j - 1] + alpha * (fpr[j] - fpr[j - 1])),
        float(fnr[j - 1] + alpha * (fnr[j] - fnr[j - 1])),
    )


def eer(samples: Sequence[ScoredFrame]) -> Tuple[float, float]:
    """Equal error rate and its threshold.

    Both rates are linearly interpolated between adjacent distinct
    thresholds and the intersection point is returned; at that threshold
    the interpolated rates agree exactly. Direct counting at the same
    threshold can differ by at most the FPR+FNR jump across the crossing
    (tied scores cannot be split by any threshold).
    """
    thresholds, fpr, fnr = _rate_curves(samples)
    diff = fpr - fnr  # non-decreasing from -1 to +1
    j = int(np.searchsorted(diff >= 0, True))
    if diff[j] == 0.0:
        return float(fpr[j]), float(thresholds[j])
    alpha = -diff[j - 1] / (diff[j] - diff[j - 1])
    rate = float(fpr[j - 1] + alpha * (fpr[j] - fpr[j - 1]))
    threshold = float(thresholds[j - 1] + alpha * (thresholds[j] - thresholds[j - 1]))
    return rate, threshold


def windows_to_frame_scores(
    scored_windows: Sequence[Tuple[FeatureWindow, float]],
    labels: Iterable[FrameLabel],
    default_score: Optional[float] = None,
    drop_uncovered: bool = False,
) -> Tuple[List[ScoredFrame], List[Tuple[str, int]]]:
    """Per-frame anomaly score = max over all windows covering the frame.

    Labeled frames no window covers get ``default_score`` (the least
    anomalous observed window score when unset), or are dropped when
    ``drop_uncovered`` is set. Returns (frames, uncovered frame keys).
    """
    best: Dict[Tuple[str, int], float] = {}
    for window, score in scored_windows:
        if not math.isfinite(score):
            raise DataError(f"non-finite window score {score}")
        T = window.shape[0]
        for frame in range(window.start_frame, window.start_frame + T):
            key = (window.video_id, frame)
            if key not in best or score > best[key]:
                best[key] = score
    if default_score is None:
        default_score = min(best.values()) if best else 0.0
    frames: List[ScoredFrame] = []
    uncovered: List[Tuple[str, int]] = []
    for label in sorted(labels, key=lambda l: (l.video_id, l.frame_index)):
        key = (label.video_id, label.frame_index)
        if key in best:
            frames.append(ScoredFrame(label.video_id, label.frame_index, best[key], label.label))
        else:
            uncovered.append(key)
            if not drop_uncovered:
                frames.append(
                    ScoredFrame(label.video_id, label.frame_index, default_score, label.label)
                )
    return frames, uncovered


def metrics_report(samples: Sequence[ScoredFrame], uncovered_frames: int = 0) -> MetricsReport:
    """AUC-ROC, AUC-PR and EER of one concatenated sample set."""
    eer_rate, eer_threshold = eer(samples)
    n_pos = sum(1 for s in samples if s.label is Label.ANOMALOUS)
    return MetricsReport(
        auc_roc=auc_roc(samples),
        auc_pr=auc_pr(samples),
        eer=eer_rate,
        eer_threshold=eer_threshold,
        n_pos=n_pos,
        n_neg=len(samples) - n_pos,
        uncovered_frames=uncovered_frames,
    )


def metrics_report_per_video(
    samples: Sequence[ScoredFrame], uncovered_frames: int = 0
) -> Tuple[MetricsReport, List[str]]:
    """Average the three metrics over videos instead of concatenating.

    Single-class videos cannot be scored and are skipped; their ids are
    returned alongside the averaged report.
    """
    by_video: Dict[str, List[ScoredFrame]] = {}
    for sample in samples:
        by_video.setdefault(sample.video_id, []).append(sample)
    reports = []
    skipped = []
    for video_id in sorted(by_video):
        video_samples = by_video[video_id]
        labels = {s.label for s in video_samples}
        if len(labels) < 2:
            skipped.append(video_id)
            continue
        reports.append(metrics_report(video_samples))
    if not reports:
        raise DataError("no video has both classes; per-video averaging impossible")
    return (
        MetricsReport(
            auc_roc=sum(r.auc_roc for r in reports) / len(reports),
            auc_pr=sum(r.auc_pr for r in reports) / len(reports),
            eer=sum(r.eer for r in reports) / len(reports),
            eer_threshold=sum(r.eer_threshold for r in reports) / len(reports),
            n_pos=sum(r.n_pos for r in reports),
            n_neg=sum(r.n_neg for r in reports),
            uncovered_frames=uncovered_frames,
        ),
        skipped,
    )
