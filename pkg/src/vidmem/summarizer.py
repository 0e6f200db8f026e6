"""Memorability-weighted clip importance and budgeted summary selection.

Each clip's base importance is shifted by ``mu`` times its predicted
memorability, then clips are chosen by an exact 0-1 knapsack over frame
counts with a budget of a fixed fraction of the video's frames.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.special import expit

from .dataio import Clip, ClipManifest, LatentWorld, SyntheticConfig
from .errors import ParameterError, SchemaError
from .metrics import SummaryEval, mean_summary_f1, summary_f1


@dataclass
class RectifiedScores:
    base: np.ndarray
    memorability: np.ndarray
    rectified: np.ndarray
    mu: float


@dataclass
class SummarySelection:
    selected: list  # clip indices, ascending
    total_frames: int
    budget: int
    objective: float
    shift: float = 0.0
    clip_ids: list = field(default_factory=list)


@dataclass
class SummaryResult:
    selection: SummarySelection
    evaluation: SummaryEval
    scores: RectifiedScores
    frames: frozenset

    def to_json(self):
        return {
            "selected_clip_ids": self.selection.clip_ids,
            "frame_budget": self.selection.budget,
            "selected_frames": self.selection.total_frames,
            "objective": self.selection.objective,
            "weight_shift": self.selection.shift,
            "mu": self.scores.mu,
            "precision": self.evaluation.precision,
            "recall": self.evaluation.recall,
            "f1": self.evaluation.f1,
        }


def score_memorability(motion_seq, model):
    """Memorability of one clip from its motion descriptors (inference mode)."""
    motion = np.asarray(motion_seq, dtype=np.float64)
    if motion.ndim != 2:
        raise SchemaError(f"clip motion must be a T x D matrix, got shape {motion.shape}")
    return float(model.predict(motion[None])[0])


def rectify(base, memorability, mu):
    base = np.asarray(base, dtype=np.float64)
    memorability = np.asarray(memorability, dtype=np.float64)
    if base.shape != memorability.shape:
        raise SchemaError(f"{base.shape[0] if base.ndim else 0} base scores vs {memorability.size} memorability scores")
    if mu < 0:
        raise ParameterError(f"mu must be nonnegative, got {mu}")
    return RectifiedScores(base, memorability, base + mu * memorability, float(mu))


def _exact_integers(values):
    """Scale floats to integers sharing one power-of-two denominator, exactly."""
    ratios = [Fraction(v) for v in values]
    denom = max((r.denominator for r in ratios), default=1)
    return [int(r * denom) for r in ratios]


def knapsack_select(frame_counts, values, budget_fraction=0.15, clip_ids=None):
    """Exact 0-1 knapsack over frame counts with budget ``floor(fraction * total)``.

    Negative values are shifted up by ``-min(values)`` first. Among optimal
    subsets the one covering more frames wins, then the lexicographically
    smallest index set.
    """
    counts = [int(c) for c in frame_counts]
    if len(counts) != len(values):
        raise SchemaError(f"{len(counts)} frame counts for {len(values)} values")
    if any(c <= 0 or c != fc for c, fc in zip(counts, frame_counts)):
        raise SchemaError("frame counts must be positive integers")
    if not 0.0 <= budget_fraction <= 1.0:
        raise ParameterError(f"budget fraction must lie in [0, 1], got {budget_fraction}")
    values = [float(v) for v in values]
    if not all(math.isfinite(v) for v in values):
        raise SchemaError("clip values must be finite")
    shift = -min(values) if values and min(values) < 0 else 0.0
    shifted = [v + shift for v in values]
    budget = int(math.floor(budget_fraction * sum(counts)))

    weights = _exact_integers(shifted)
    n = len(counts)
    # best[i][c]: best (value, frames) using clips i.. with capacity c
    best = [[(0, 0)] * (budget + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        nxt, row, w, v = best[i + 1], best[i], counts[i], weights[i]
        for c in range(budget + 1):
            skip = nxt[c]
            if w <= c:
                val, frames = nxt[c - w]
                take = (val + v, frames + w)
                row[c] = take if take > skip else skip
            else:
                row[c] = skip
    selected, c = [], budget
    for i in range(n):
        w = counts[i]
        if w <= c:
            val, frames = best[i + 1][c - w]
            if (val + weights[i], frames + w) == best[i][c]:
                selected.append(i)
                c -= w
    ids = [clip_ids[i] for i in selected] if clip_ids is not None else list(selected)
    return SummarySelection(
        selected=selected,
        total_frames=sum(counts[i] for i in selected),
        budget=budget,
        objective=math.fsum(shifted[i] for i in selected),
        shift=shift,
        clip_ids=ids,
    )


def clip_frames(frame_counts, selected):
    """Frame indices covered by the selected clips, in manifest order."""
    offsets = np.concatenate([[0], np.cumsum(frame_counts)])
    return frozenset(f for i in selected for f in range(int(offsets[i]), int(offsets[i + 1])))


def summarize(manifest, model, mu=0.5, budget_fraction=0.15, memorability=None):
    """Score, rectify, select and evaluate one video's summary.

    ``memorability`` may hold precomputed clip scores; otherwise each clip is
    scored with ``model``.
    """
    manifest.validate()
    if memorability is None:
        if mu == 0:
            memorability = np.zeros(len(manifest.clips))
        else:
            motion = np.stack([c.motion_seq for c in manifest.clips])
            memorability = model.predict(motion)
    scores = rectify([c.base_importance for c in manifest.clips], memorability, mu)
    counts = manifest.frame_counts()
    selection = knapsack_select(counts, scores.rectified, budget_fraction, [c.clip_id for c in manifest.clips])
    frames = clip_frames(counts, selection.selected)
    evaluation = summary_f1(frames, manifest.ground_truth_frames, manifest.total_frames, manifest.video_id)
    return SummaryResult(selection, evaluation, scores, frames)


class LinearBaseScorer:
    """Stand-in clip importance: sigmoid of a seeded linear map of mean motion."""

    def __init__(self, d_raw, seed=0):
        self.weights = np.random.default_rng(seed).standard_normal(d_raw) / math.sqrt(d_raw)

    def __call__(self, motion_seq):
        return float(expit(np.asarray(motion_seq).mean(axis=0) @ self.weights))

    def fill(self, manifest):
        clips = [Clip(c.clip_id, c.frame_count, self(c.motion_seq), c.motion_seq) for c in manifest.clips]
        return ClipManifest(manifest.video_id, clips, manifest.total_frames, manifest.ground_truth_frames)


def synthetic_corpus(cfg, num_videos=20, clips_per_video=20, frame_range=(20, 80),
                     memorability_share=0.5, budget_fraction=0.15, seed=0):
    """Seeded summarization manifests drawn from the same latent world as ``cfg``.

    Ground-truth importance is ``(1 - share) * base + share * true memorability``;
    the ground-truth summary is the knapsack selection over that importance.
    Returns ``(manifests, true_memorability)``.
    """
    if not isinstance(cfg, SyntheticConfig):
        raise ParameterError("cfg must be a SyntheticConfig")
    world = LatentWorld(cfg)
    rng = np.random.default_rng([cfg.seed, 2, seed])
    manifests, truths = [], []
    lo, hi = frame_range
    for v in range(num_videos):
        z = rng.standard_normal((clips_per_video, cfg.latent_dim))
        motion = world.motion(z, rng)
        mem = world.memorability(z)
        base = rng.uniform(0.0, 1.0, clips_per_video)
        counts = rng.integers(lo, hi + 1, clips_per_video)
        gt_importance = (1 - memorability_share) * base + memorability_share * mem
        gt_sel = knapsack_select(counts, gt_importance, budget_fraction)
        gt_frames = clip_frames(counts, gt_sel.selected)
        clips = [Clip(f"c{i:02d}", int(counts[i]), float(base[i]), motion[i]) for i in range(clips_per_video)]
        manifests.append(ClipManifest(f"video{v:03d}", clips, int(counts.sum()), gt_frames).validate())
        truths.append(mem)
    return manifests, truths


def mu_sweep(manifests, model, mu_grid=(1.0, 0.5, 0.1, 0.0), budget_fraction=0.15):
    """Mean summary F1 for each ``mu``; clip memorability is scored once per manifest."""
    memorability = [model.predict(np.stack([c.motion_seq for c in m.clips])) for m in manifests]
    rows = []
    for mu in mu_grid:
        results = [summarize(m, model, mu, budget_fraction, s) for m, s in zip(manifests, memorability)]
        rows.append({
            "mu": float(mu),
            "f1": mean_summary_f1([r.evaluation for r in results]).f1,
            "precision": float(np.mean([r.evaluation.precision for r in results])),
            "recall": float(np.mean([r.evaluation.recall for r in results])),
        })
    return rows
