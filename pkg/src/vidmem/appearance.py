"""Multi-level visual appearance encoding and text-guided segment attention.

Frame features are summarized at three levels and concatenated:

* global: mean over frames,
* temporal: mean over bidirectional GRU states,
* local: for each kernel size, mean over time of ReLU(conv1d(GRU states)).

The concatenation is cut into equal segments; a text-conditioned score per
segment is softmax-normalized and the raw segments are averaged with those
weights.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError
from .numerics import (
    ParamSet,
    Tensor,
    as_tensor,
    bigru,
    concat,
    conv1d,
    dense,
    mean_pool,
    relu,
    softmax,
    tanh,
)

KERNEL_SIZES = (2, 3, 4, 5)


@dataclass(frozen=True)
class AppearanceConfig:
    hidden: int = 1024
    channels: int = 512
    segments: int = 9
    common_dim: int = 512
    kernel_sizes: tuple = KERNEL_SIZES

    def multilevel_dim(self, d_v):
        return d_v + 2 * self.hidden + len(self.kernel_sizes) * self.channels

    def segment_dim(self, d_v):
        d_vm = self.multilevel_dim(d_v)
        if self.segments < 1 or d_vm % self.segments:
            raise ConfigError(
                f"multi-level width {d_vm} (= {d_v} + 2*{self.hidden} + "
                f"{len(self.kernel_sizes)}*{self.channels}) is not divisible into {self.segments} segments"
            )
        return d_vm // self.segments


@dataclass
class MultiLevelFeature:
    global_part: Tensor
    temporal_part: Tensor
    local_part: Tensor
    concat: Tensor


def encode_global(frames):
    return mean_pool(as_tensor(frames))


def encode_temporal(frames, hidden, params, prefix="temporal", return_states=False):
    states = bigru(as_tensor(frames), hidden, params, f"{prefix}.bigru")
    pooled = mean_pool(states)
    return (pooled, states) if return_states else pooled


def encode_local(H, channels, params, prefix="local", kernel_sizes=KERNEL_SIZES):
    blocks = [
        mean_pool(relu(conv1d(H, k, channels, params, f"{prefix}.conv{k}")))
        for k in kernel_sizes
    ]
    return concat(blocks, axis=-1)


def encode_multilevel(frames, params, config=None):
    config = config or AppearanceConfig()
    frames = as_tensor(frames)
    config.segment_dim(frames.shape[-1])
    f_v1 = encode_global(frames)
    f_v2, H = encode_temporal(frames, config.hidden, params, return_states=True)
    f_v3 = encode_local(H, config.channels, params, kernel_sizes=config.kernel_sizes)
    return MultiLevelFeature(f_v1, f_v2, f_v3, concat([f_v1, f_v2, f_v3], axis=-1))


def segment_scores(f_vm, f_t, params, config=None, prefix="attn"):
    """Relevance logit per segment: ``W tanh(W_v relu(U_v s_i) + W_t relu(U_t f_t))``."""
    config = config or AppearanceConfig()
    f_vm, f_t = as_tensor(f_vm), as_tensor(f_t)
    l = config.segments
    if f_vm.shape[-1] % l:
        raise ConfigError(f"feature width {f_vm.shape[-1]} is not divisible into {l} segments")
    if f_vm.shape[:-1] != f_t.shape[:-1]:
        raise DimensionError(f"batch shapes differ: {f_vm.shape} vs {f_t.shape}")
    segs = f_vm.reshape(f_vm.shape[:-1] + (l, f_vm.shape[-1] // l))
    d = config.common_dim
    seg_hat = dense(relu(dense(segs, d, params, f"{prefix}.U_v")), d, params, f"{prefix}.W_v")
    text_hat = dense(relu(dense(f_t, d, params, f"{prefix}.U_t")), d, params, f"{prefix}.W_t")
    if seg_hat.shape[-1] != text_hat.shape[-1]:
        raise ConfigError("projected visual and text spaces differ in width")
    text_hat = text_hat.reshape(text_hat.shape[:-1] + (1, d))
    e = dense(tanh(seg_hat + text_hat), 1, params, f"{prefix}.W")
    return e.reshape(e.shape[:-1]), segs


def attend(f_vm, f_t, params, config=None, prefix="attn"):
    """Text-weighted average of the raw segments of ``f_vm``.

    Returns ``(f_ve, alphas)`` with ``f_ve`` of width ``D_vm / l``.
    """
    e, segs = segment_scores(f_vm, f_t, params, config, prefix)
    alphas = softmax(e)
    f_ve = (alphas.reshape(alphas.shape + (1,)) * segs).sum(axis=-2)
    return f_ve, alphas


class AppearanceEncoder:
    """Frames plus text feature to enhanced appearance feature."""

    def __init__(self, d_v, d_t, config=None, params=None, seed=0):
        self.config = config or AppearanceConfig()
        self.d_v, self.d_t = d_v, d_t
        self.segment_dim = self.config.segment_dim(d_v)
        self.params = params if params is not None else ParamSet(seed)

    def __call__(self, frames, text):
        frames, text = as_tensor(frames), as_tensor(text)
        if frames.shape[-1] != self.d_v or text.shape[-1] != self.d_t:
            raise DimensionError(
                f"expected frame width {self.d_v} and text width {self.d_t}, "
                f"got {frames.shape} and {text.shape}"
            )
        ml = encode_multilevel(frames, self.params, self.config)
        return attend(ml.concat, text, self.params, self.config)

    def alphas(self, frames, text):
        _, alphas = self(np.asarray(frames), np.asarray(text))
        return alphas.numpy()
