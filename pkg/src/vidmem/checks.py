"""Finite-difference gradient checks for every differentiable block in the model."""
from __future__ import annotations

import numpy as np

from .appearance import AppearanceConfig, attend, encode_multilevel
from .fusion import modality_heads
from .numerics import ParamSet, Tensor, bigru, conv1d, grad_check, l2_normalize, linear
from .tmccl import tmccl_loss


def _readout(out, rng):
    """Scalar probe of ``out``: a fixed random weighting of every entry."""
    return (out * Tensor(rng.standard_normal(out.shape))).sum()


def check_linear(seed=0, eps=1e-5):
    rng = np.random.default_rng(seed)
    p = ParamSet(seed)
    p.add("x", rng.standard_normal((3, 4)))
    p.add("weight", rng.standard_normal((4, 2)))
    p.add("bias", rng.standard_normal(2))
    probe = np.random.default_rng(seed + 1)
    w = Tensor(probe.standard_normal((3, 2)))
    return grad_check(lambda: (linear(p["x"], p["weight"], p["bias"]) * w).sum(), p, eps, "linear")


def check_conv1d(kernel_size, seed=0, eps=1e-5):
    rng = np.random.default_rng(seed)
    p = ParamSet(seed)
    p.add("x", rng.standard_normal((7, 5)))
    w = Tensor(np.random.default_rng(seed + 1).standard_normal((7, 4)))
    return grad_check(lambda: (conv1d(p["x"], kernel_size, 4, p) * w).sum(), p, eps, f"conv1d_k{kernel_size}")


def check_bigru(seed=0, eps=1e-5, steps=4):
    rng = np.random.default_rng(seed)
    p = ParamSet(seed)
    p.add("x", rng.standard_normal((steps, 5)))
    w = Tensor(np.random.default_rng(seed + 1).standard_normal((steps, 6)))
    return grad_check(lambda: (bigru(p["x"], 3, p) * w).sum(), p, eps, "bigru")


def check_attention(seed=0, eps=1e-5):
    """Multi-level encoding followed by text attention, end to end."""
    rng = np.random.default_rng(seed)
    cfg = AppearanceConfig(hidden=3, channels=2, segments=4, common_dim=5)  # D_vm = 6 + 6 + 8 = 20
    p = ParamSet(seed)
    p.add("frames", rng.standard_normal((3, 6)))
    p.add("text", rng.standard_normal(7))
    w = Tensor(np.random.default_rng(seed + 1).standard_normal(5))

    def fn():
        f_vm = encode_multilevel(p["frames"], p, cfg).concat
        f_ve, _ = attend(f_vm, p["text"], p, cfg)
        return (f_ve * w).sum()

    return grad_check(fn, p, eps, "attention")


def check_heads(seed=0, eps=1e-5):
    rng = np.random.default_rng(seed)
    p = ParamSet(seed)
    p.add("f_ve", rng.standard_normal((2, 5)))
    p.add("f_t", rng.standard_normal((2, 4)))
    p.add("f_m", rng.standard_normal((2, 3)))
    w = np.random.default_rng(seed + 1).standard_normal(3)

    def fn():
        s = modality_heads(p["f_ve"], p["f_t"], p["f_m"], p, hidden=6)
        return w[0] * s.s_v.sum() + w[1] * s.s_t.sum() + w[2] * s.s_m.sum()

    return grad_check(fn, p, eps, "modality_heads")


def check_tmccl(seed=0, eps=1e-5, tau=0.07):
    rng = np.random.default_rng(seed)
    p = ParamSet(seed)
    p.add("target", rng.standard_normal(6))
    p.add("positives", rng.standard_normal((3, 6)))
    p.add("negatives", rng.standard_normal((5, 6)))

    def fn():
        return tmccl_loss(
            l2_normalize(p["target"]), l2_normalize(p["positives"]), l2_normalize(p["negatives"]), tau
        )

    return grad_check(fn, p, eps, "tmccl_loss")


def gradcheck_suite(seed=0, eps=1e-5):
    """Reports for linear, conv1d (k = 2..5), bigru, attention, heads and the contrastive loss."""
    reports = [check_linear(seed, eps)]
    reports += [check_conv1d(k, seed, eps) for k in (2, 3, 4, 5)]
    reports += [check_bigru(seed, eps), check_attention(seed, eps), check_heads(seed, eps), check_tmccl(seed, eps)]
    return reports
