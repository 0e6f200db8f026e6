"""Per-modality score heads and decision-level fusion on the weight simplex."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ConfigError, DegenerateDataError, DimensionError, ParameterError, UndefinedMetricError
from .metrics import spearman_rc
from .numerics import as_tensor, mlp, sigmoid


@dataclass
class ModalityScores:
    """Visual, text and motion scores; floats for one video or arrays for many."""

    s_v: object
    s_t: object
    s_m: object

    def as_array(self):
        return np.stack([np.asarray(getattr(s, "data", s), dtype=np.float64) for s in (self.s_v, self.s_t, self.s_m)], axis=-1)


@dataclass(frozen=True)
class FusionWeights:
    theta_v: float
    theta_t: float
    theta_m: float

    def __post_init__(self):
        parts = (self.theta_v, self.theta_t, self.theta_m)
        if any(not 0.0 <= p <= 1.0 for p in parts) or abs(sum(parts) - 1.0) > 1e-9:
            raise ParameterError(f"fusion weights must lie on the simplex, got {parts}")

    def as_tuple(self):
        return (self.theta_v, self.theta_t, self.theta_m)

    def to_json(self):
        return {"theta_v": self.theta_v, "theta_t": self.theta_t, "theta_m": self.theta_m}


def modality_heads(f_ve, f_t, f_m, params, hidden=64, prefix="heads"):
    """Three linear-ReLU-linear heads squashed by a sigmoid, one per modality."""
    f_ve, f_t, f_m = as_tensor(f_ve), as_tensor(f_t), as_tensor(f_m)
    batch = {f_ve.shape[:-1], f_t.shape[:-1], f_m.shape[:-1]}
    if len(batch) != 1:
        raise ConfigError(f"modality features disagree on batch shape: {f_ve.shape}, {f_t.shape}, {f_m.shape}")
    scores = [
        sigmoid(mlp(x, hidden, 1, params, f"{prefix}.{name}"))[..., 0]
        for name, x in (("visual", f_ve), ("text", f_t), ("motion", f_m))
    ]
    return ModalityScores(*scores)


def grid_weights(c=0.05):
    """Feasible simplex points on the grid ``theta_v = 1 - t_v c``, ``theta_m = 1 - t_m c``."""
    if c <= 0:
        raise ParameterError(f"step size must be positive, got {c}")
    steps = Fraction(1) / Fraction(c).limit_denominator(10**6)
    if steps.denominator != 1 or abs(float(steps) - 1.0 / c) > 1e-9:
        raise ParameterError(f"1/c must be an integer, got c={c}")
    m = steps.numerator
    grid = []
    for t_v in range(m + 1):
        for t_m in range(m + 1):
            t_t = t_v + t_m - m
            if t_t < 0:
                continue
            grid.append(FusionWeights((m - t_v) / m, t_t / m, (m - t_m) / m))
    return grid


def fuse(scores, weights):
    """Convex combination ``theta_v s_v + theta_t s_t + theta_m s_m``."""
    return scores.as_array() @ np.array(weights.as_tuple())


def select_weights(val_scores, val_gt, c=0.05):
    """Grid point whose fused validation scores rank-correlate best with ``val_gt``.

    Ties go to the larger ``theta_v``, then the larger ``theta_t``. Grid
    points whose fused scores are constant are skipped.
    """
    if isinstance(val_scores, ModalityScores):
        stacked = val_scores.as_array()
    else:
        stacked = np.array([s.as_array() for s in val_scores], dtype=np.float64).reshape(-1, 3)
    gt = np.asarray(val_gt, dtype=np.float64)
    if stacked.shape[0] != gt.shape[0]:
        raise DimensionError(f"{stacked.shape[0]} score triples for {gt.shape[0]} labels")
    if stacked.shape[0] == 0:
        raise DegenerateDataError("validation set is empty")
    best, best_key = None, None
    for w in grid_weights(c):
        try:
            rc = spearman_rc(stacked @ np.array(w.as_tuple()), gt)
        except UndefinedMetricError:
            continue
        # rounding keeps equal correlations equal regardless of summation order
        key = (round(rc, 12), w.theta_v, w.theta_t)
        if best_key is None or key > best_key:
            best, best_key = w, key
    if best is None:
        raise DegenerateDataError("rank correlation undefined for every grid point")
    return best


def evaluate_grid(val_scores, val_gt, c=0.05):
    """Validation RC for every feasible grid point (None where undefined)."""
    stacked = val_scores.as_array() if isinstance(val_scores, ModalityScores) else np.array(
        [s.as_array() for s in val_scores]
    )
    out = []
    for w in grid_weights(c):
        try:
            out.append((w, spearman_rc(stacked @ np.array(w.as_tuple()), val_gt)))
        except UndefinedMetricError:
            out.append((w, None))
    return out
