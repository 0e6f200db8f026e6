"""End-to-end memorability model: appearance, text and motion heads plus fusion."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .appearance import AppearanceConfig, AppearanceEncoder
from .errors import DomainError, NumericError
from .fusion import ModalityScores, fuse, modality_heads, select_weights
from .metrics import spearman_rc
from .numerics import Adam, ParamSet, backward, no_grad, square, step_lr

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HeadConfig:
    appearance: AppearanceConfig = field(
        default_factory=lambda: AppearanceConfig(hidden=18, channels=9, segments=9, common_dim=16)
    )
    head_hidden: int = 16
    epochs: int = 40
    batch: int = 16
    lr: float = 0.001
    weight_decay: float = 0.0001
    step_epochs: int = 60
    lr_decay: float = 0.1
    fusion_step: float = 0.05


class MultimodalModel:
    """Appearance encoder and three score heads over a frozen motion encoder."""

    def __init__(self, d_v, d_t, motion_encoder, config=None, seed=0):
        self.config = config or HeadConfig()
        self.params = ParamSet(seed)
        self.appearance = AppearanceEncoder(d_v, d_t, self.config.appearance, params=self.params)
        self.motion_encoder = motion_encoder
        self.weights = None

    def _scores(self, frames, text, f_m):
        f_ve, _ = self.appearance(frames, text)
        return modality_heads(f_ve, text, f_m, self.params, self.config.head_hidden)

    def modality_scores(self, records):
        frames, text, f_m = _inputs(records, self.motion_encoder)
        with no_grad():
            s = self._scores(frames, text, f_m)
        return ModalityScores(s.s_v.numpy(), s.s_t.numpy(), s.s_m.numpy())

    def fit(self, records, target="st_score", seed=0):
        cfg = self.config
        frames, text, f_m = _inputs(records, self.motion_encoder)
        y = np.array([getattr(r, target) for r in records])
        self._scores(frames[:1], text[:1], f_m[:1])  # create parameters
        opt = Adam(self.params, lr=cfg.lr, weight_decay=cfg.weight_decay)
        rng = np.random.default_rng([seed, 21])
        trace = []
        for epoch in range(cfg.epochs):
            opt.lr = step_lr(cfg.lr, epoch, cfg.step_epochs, cfg.lr_decay)
            perm = rng.permutation(len(records))
            total = 0.0
            for start in range(0, len(records), cfg.batch):
                idx = perm[start:start + cfg.batch]
                s = self._scores(frames[idx], text[idx], f_m[idx])
                yb = y[idx]
                loss = square(s.s_v - yb).mean() + square(s.s_t - yb).mean() + square(s.s_m - yb).mean()
                value = loss.item()
                if not math.isfinite(value):
                    raise NumericError(f"non-finite head loss at epoch {epoch}")
                backward(loss, self.params)
                opt.step()
                total += value * len(idx)
            trace.append(total / len(records))
        return trace

    def select_fusion(self, records, target="st_score"):
        scores = self.modality_scores(records)
        gt = [getattr(r, target) for r in records]
        self.weights = select_weights(scores, gt, self.config.fusion_step)
        return self.weights

    def predict(self, records):
        if self.weights is None:
            raise DomainError("fusion weights not selected; call select_fusion first")
        return fuse(self.modality_scores(records), self.weights)


def _inputs(records, motion_encoder):
    frames = np.stack([r.frames for r in records])
    text = np.stack([r.text for r in records])
    f_m = motion_encoder.motion_features(np.stack([r.motion_seq for r in records]))
    return frames, text, f_m


def evaluate_multimodal(train, val, test, motion_encoder, config=None, seed=0, target="st_score"):
    """Fit heads on ``train``, pick fusion weights on ``val``, report RC on ``test``."""
    config = config or HeadConfig()
    d_v, d_t = train[0].frames.shape[-1], train[0].text.shape[-1]
    model = MultimodalModel(d_v, d_t, motion_encoder, config, seed=seed)
    trace = model.fit(train, target, seed)
    weights = model.select_fusion(val, target)
    scores = model.modality_scores(test)
    gt = [getattr(r, target) for r in test]
    fused = fuse(scores, weights)
    return {
        "rc": spearman_rc(fused, gt),
        "rc_visual": spearman_rc(scores.s_v, gt),
        "rc_text": spearman_rc(scores.s_t, gt),
        "rc_motion": spearman_rc(scores.s_m, gt),
        "weights": weights,
        "loss_trace": trace,
    }
