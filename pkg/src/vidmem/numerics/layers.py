"""Differentiable building blocks: linear maps, 1-D convolution, GRUs, pooling.

Layers that own weights take a :class:`ParamSet` and a dotted ``prefix`` and
create their parameters on first use. All layers accept leading batch axes.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import DimensionError, DomainError, ParameterError
from . import tensor as T
from .tensor import Tensor, as_tensor


def linear(x, weight, bias=None):
    """Affine map ``x @ weight + bias`` over the last axis of ``x``."""
    x, weight = as_tensor(x), as_tensor(weight)
    if weight.ndim != 2 or x.shape[-1] != weight.shape[0]:
        raise DimensionError(f"linear: input shape {x.shape} does not match weight shape {weight.shape}")
    out = T.matmul(x, weight)
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (weight.shape[1],):
            raise DimensionError(f"linear: bias shape {bias.shape} does not match weight shape {weight.shape}")
        out = out + bias
    return out


def dense(x, d_out, params, prefix):
    """:func:`linear` with weights stored in ``params`` under ``prefix``."""
    d_in = x.shape[-1]
    w = params.get_or_init(f"{prefix}.weight", (d_in, d_out), fan_in=d_in)
    b = params.get_or_init(f"{prefix}.bias", (d_out,), fan_in=d_in)
    return linear(x, w, b)


def mlp(x, d_hidden, d_out, params, prefix):
    """Linear, ReLU, linear."""
    h = T.relu(dense(x, d_hidden, params, f"{prefix}.fc1"))
    return dense(h, d_out, params, f"{prefix}.fc2")


_ACTIVATIONS = {
    "relu": T.relu,
    "tanh": T.tanh,
    "sigmoid": T.sigmoid,
    "softmax": T.softmax,
}


def activation(kind, x):
    try:
        fn = _ACTIVATIONS[kind]
    except KeyError:
        raise ParameterError(f"unknown activation '{kind}'; expected one of {sorted(_ACTIVATIONS)}") from None
    return fn(as_tensor(x))


def mean_pool(x, axis=-2):
    """Arithmetic mean over the time axis (second to last by default)."""
    x = as_tensor(x)
    if x.ndim == 0:
        raise DomainError("mean_pool needs a time axis")
    return T.tmean(x, axis=axis)


def dropout(x, rate, rng, training=True):
    """Inverted dropout: zero each unit with probability ``rate`` and rescale."""
    if not 0.0 <= rate < 1.0:
        raise ParameterError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * Tensor(mask)


def same_padding(kernel_size):
    left = (kernel_size - 1) // 2
    return left, kernel_size - 1 - left


def _conv1d(x, weight, bias, kernel_size):
    """Correlate ``x`` (..., T, D) with ``weight`` (k*D, C); 'same' zero padding."""
    k = kernel_size
    steps, d_in = x.shape[-2], x.shape[-1]
    left, right = same_padding(k)
    pad = [(0, 0)] * (x.ndim - 2) + [(left, right), (0, 0)]
    xp = np.pad(x.data, pad)
    windows = sliding_window_view(xp, k, axis=-2)  # (..., T, D, k)
    cols = np.swapaxes(windows, -1, -2).reshape(x.shape[:-1] + (k * d_in,))
    out = cols @ weight.data + bias.data

    def grad_fn(g):
        gw = (cols.reshape(-1, k * d_in).T @ g.reshape(-1, g.shape[-1]))
        gb = g.reshape(-1, g.shape[-1]).sum(axis=0)
        gcols = (g @ weight.data.T).reshape(x.shape[:-1] + (k, d_in))
        gxp = np.zeros(xp.shape)
        for j in range(k):
            gxp[..., j:j + steps, :] += gcols[..., j, :]
        gx = gxp[..., left:left + steps, :]
        return gx, gw, gb

    return T._node(out, (x, weight, bias), grad_fn)


def conv1d(x, kernel_size, out_channels, params, prefix="conv"):
    """1-D convolution over time with output length equal to input length.

    ``x`` has shape (..., T, D). Padding is zero and symmetric, with the extra
    column on the right for even kernels.
    """
    if kernel_size <= 0:
        raise ParameterError(f"kernel_size must be positive, got {kernel_size}")
    if out_channels <= 0:
        raise ParameterError(f"out_channels must be positive, got {out_channels}")
    x = as_tensor(x)
    if x.ndim < 2:
        raise DimensionError(f"conv1d expects (..., T, D), got shape {x.shape}")
    fan_in = kernel_size * x.shape[-1]
    w = params.get_or_init(f"{prefix}.weight", (fan_in, out_channels), fan_in=fan_in)
    b = params.get_or_init(f"{prefix}.bias", (out_channels,), fan_in=fan_in)
    return _conv1d(x, w, b, kernel_size)


def gru(x, hidden, params, prefix="gru", reverse=False):
    """Single-direction GRU over (..., T, D); returns all states (..., T, H).

    Reset gate applied to the previous state before the candidate projection:

        z = sigmoid(x Wz + h Uz + bz)
        r = sigmoid(x Wr + h Ur + br)
        n = tanh(x Wn + (r * h) Un + bn)
        h' = (1 - z) * n + z * h

    With ``reverse`` the sequence is consumed last to first and state ``i``
    is the summary of steps ``i..T-1``.
    """
    if hidden <= 0:
        raise ParameterError(f"hidden must be positive, got {hidden}")
    x = as_tensor(x)
    d_in = x.shape[-1]
    w_x = params.get_or_init(f"{prefix}.w_x", (d_in, 3 * hidden), fan_in=hidden)
    w_h = params.get_or_init(f"{prefix}.w_h", (hidden, 3 * hidden), fan_in=hidden)
    b = params.get_or_init(f"{prefix}.bias", (3 * hidden,), fan_in=hidden)
    w_hzr = w_h[:, : 2 * hidden]
    w_hn = w_h[:, 2 * hidden:]

    steps = x.shape[-2]
    proj = T.matmul(x, w_x) + b  # (..., T, 3H)
    h = Tensor(np.zeros(x.shape[:-2] + (hidden,)))
    states = [None] * steps
    order = range(steps - 1, -1, -1) if reverse else range(steps)
    for t in order:
        p = proj[..., t, :]
        zr = T.sigmoid(p[..., : 2 * hidden] + T.matmul(h, w_hzr))
        z, r = zr[..., :hidden], zr[..., hidden:]
        n = T.tanh(p[..., 2 * hidden:] + T.matmul(r * h, w_hn))
        h = n + z * (h - n)
        states[t] = h
    return T.stack(states, axis=-2)


def bigru(x, hidden, params, prefix="bigru"):
    """Bidirectional GRU; row ``i`` is ``[forward_i ; backward_i]``."""
    fwd = gru(x, hidden, params, f"{prefix}.fwd")
    bwd = gru(x, hidden, params, f"{prefix}.bwd", reverse=True)
    return T.concat([fwd, bwd], axis=-1)
