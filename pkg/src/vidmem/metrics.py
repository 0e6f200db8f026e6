"""Rank correlation for memorability scores and frame-overlap F1 for summaries."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import DimensionError, DomainError, UndefinedMetricError


def average_ranks(values):
    """1-based ranks; tied values share the mean of the ranks they span."""
    return rankdata(np.asarray(values, dtype=np.float64), method="average")


def spearman_rc(pred, gt):
    """Spearman rank correlation: Pearson correlation of the average ranks.

    Without ties this equals ``1 - 6 * sum(d**2) / (N * (N**2 - 1))``.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape or pred.ndim != 1:
        raise DimensionError(f"spearman_rc needs two equal-length vectors, got {pred.shape} and {gt.shape}")
    if pred.size < 2:
        raise UndefinedMetricError(f"spearman_rc needs at least 2 points, got {pred.size}")
    if np.all(pred == pred[0]) or np.all(gt == gt[0]):
        raise UndefinedMetricError("spearman_rc is undefined for a constant input")
    rp = average_ranks(pred)
    rg = average_ranks(gt)
    rp -= rp.mean()
    rg -= rg.mean()
    rho = (rp @ rg) / np.sqrt((rp @ rp) * (rg @ rg))
    return float(np.clip(rho, -1.0, 1.0))


@dataclass
class SummaryEval:
    precision: float
    recall: float
    f1: float
    per_video: list = field(default_factory=list)


def summary_f1(pred_frames, gt_frames, total_frames, video_id=None):
    """Frame-overlap precision, recall and F1 of one predicted summary."""
    pred, gt = set(int(f) for f in pred_frames), set(int(f) for f in gt_frames)
    for name, frames in (("predicted", pred), ("ground-truth", gt)):
        if frames and (min(frames) < 0 or max(frames) >= total_frames):
            raise DomainError(f"{name} frames must lie in [0, {total_frames})")
    overlap = len(pred & gt)
    flagged = not pred or not gt
    precision = overlap / len(pred) if pred else 0.0
    recall = overlap / len(gt) if gt else 0.0
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    entry = {
        "video_id": video_id,
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "empty_summary": flagged,
    }
    return SummaryEval(precision, recall, f1, [entry])


def mean_summary_f1(evals):
    """Dataset-level scores: means over videos, per-video entries concatenated."""
    evals = list(evals)
    if not evals:
        raise DomainError("no videos to average")
    per_video = [e for ev in evals for e in ev.per_video]
    return SummaryEval(
        precision=float(np.mean([e.precision for e in evals])),
        recall=float(np.mean([e.recall for e in evals])),
        f1=float(np.mean([e.f1 for e in evals])),
        per_video=per_video,
    )
