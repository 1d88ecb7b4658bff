"""Network primitives: convolution, pooling, affine maps, normalization, LSTM."""
from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .tensor import (
    Tensor,
    add,
    concat,
    exp,
    leaky_relu,
    matmul,
    mul,
    relu,
    sigmoid,
    softmax,
    tanh,
)


# -- initialization -------------------------------------------------------
def glorot(rng, shape, fan_in, fan_out, dtype=np.float32):
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


# -- convolution ----------------------------------------------------------
def conv_output_length(length, ks, stride, padding):
    if stride < 1:
        raise ValueError(f"stride must be positive, got {stride}")
    if padding == "same":
        return -(-length // stride)
    if padding == "valid":
        if ks > length:
            raise ValueError(f"kernel size {ks} exceeds input length {length}")
        return (length - ks) // stride + 1
    raise ValueError(f"unknown padding {padding!r}")


def same_padding(length, ks, stride):
    """(left, right) padding for 'same' mode; odd totals put the extra element on the right."""
    out = -(-length // stride)
    total = max((out - 1) * stride + ks - length, 0)
    return total // 2, total - total // 2


def conv1d(x, weight, bias=None, stride=1, padding="valid", groups=1):
    """Grouped 1-D cross-correlation.

    x: [N, C_in, L]; weight: [C_out, C_in // groups, ks]; bias: [C_out] or None.
    With ``groups == C_in`` every input channel has its own bank of
    ``C_out // C_in`` kernels and the results are concatenated per channel
    (depth-wise mode); nothing is summed across groups.
    """
    n, c_in, length = x.shape
    c_out, cin_g, ks = weight.shape
    if c_in % groups or c_out % groups or cin_g != c_in // groups:
        raise ValueError(f"channel/group mismatch: x {x.shape}, weight {weight.shape}, groups {groups}")
    l_out = conv_output_length(length, ks, stride, padding)
    left, right = same_padding(length, ks, stride) if padding == "same" else (0, 0)
    xp = np.pad(x.data, ((0, 0), (0, 0), (left, right))) if left or right else x.data
    xp = np.ascontiguousarray(xp)
    cout_g = c_out // groups

    s0, s1, s2 = xp.strides
    # patches [N, C_in, L_out, ks]
    patches = as_strided(xp, (n, c_in, l_out, ks), (s0, s1, s2 * stride, s2), writeable=False)
    cols = patches.reshape(n, groups, cin_g, l_out, ks).transpose(0, 1, 3, 2, 4)
    cols = np.ascontiguousarray(cols).reshape(n, groups, l_out, cin_g * ks)
    w = weight.data.reshape(groups, cout_g, cin_g * ks).transpose(0, 2, 1)  # [G, K, cout_g]
    out = cols @ w  # [N, G, L_out, cout_g]
    out = out.transpose(0, 1, 3, 2).reshape(n, c_out, l_out)
    if bias is not None:
        out = out + bias.data[None, :, None]

    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        gg = g.reshape(n, groups, cout_g, l_out).transpose(0, 1, 3, 2)  # [N, G, L_out, cout_g]
        gw = None
        if weight.requires_grad:
            gw = np.einsum("nglk,nglo->gok", cols, gg, optimize=True).reshape(weight.shape)
        gx = None
        if x.requires_grad:
            gcols = gg @ w.transpose(0, 2, 1)  # [N, G, L_out, K]
            gcols = gcols.reshape(n, groups, l_out, cin_g, ks).transpose(0, 1, 3, 2, 4)
            gcols = gcols.reshape(n, c_in, l_out, ks)
            gxp = np.zeros_like(xp)
            span = stride * (l_out - 1) + 1
            for k in range(ks):
                gxp[:, :, k:k + span:stride] += gcols[:, :, :, k]
            gx = gxp[:, :, left:left + length]
        grads = (gx, gw)
        if bias is not None:
            grads += (g.sum(axis=(0, 2)),)
        return grads

    return Tensor._result(out, parents, backward, "conv1d")


def maxpool1d(x, window):
    """Non-overlapping max pooling over the last axis; the trailing remainder is dropped."""
    if window < 1:
        raise ValueError(f"pool window must be >= 1, got {window}")
    length = x.shape[-1]
    l_out = length // window
    if l_out == 0:
        raise ValueError(f"pool window {window} exceeds input length {length}")
    blocks = x.data[..., : l_out * window].reshape(*x.shape[:-1], l_out, window)
    arg = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0]

    def backward(g):
        gb = np.zeros(blocks.shape, dtype=g.dtype)
        np.put_along_axis(gb, arg[..., None], g[..., None], axis=-1)
        gx = np.zeros_like(x.data)
        gx[..., : l_out * window] = gb.reshape(*x.shape[:-1], l_out * window)
        return (gx,)

    return Tensor._result(out, (x,), backward, "maxpool1d")


# -- affine / activation --------------------------------------------------
def dense(x, weight, bias=None):
    """Affine map over the last axis, broadcast over leading axes."""
    if x.shape[-1] != weight.shape[0]:
        raise ValueError(f"dense extent mismatch: input {x.shape[-1]} vs weight {weight.shape}")
    lead = x.shape[:-1]
    y = matmul(x.reshape(-1, x.shape[-1]), weight)
    if bias is not None:
        y = add(y, bias)
    return y.reshape(*lead, weight.shape[1])


def activate(x, kind, slope=0.01):
    if kind == "relu":
        return relu(x)
    if kind == "leakyrelu":
        return leaky_relu(x, slope)
    if kind == "softmax":
        return softmax(x, axis=-1)
    if kind == "exp":
        return exp(x)
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "tanh":
        return tanh(x)
    raise ValueError(f"unknown activation {kind!r}")


def dropout(x, rate, rng, training):
    """Inverted dropout: survivors are scaled by 1/keep at train time."""
    if not training or rate <= 0:
        return x
    keep = 1.0 - rate
    mask = (rng.random(x.shape) < keep).astype(x.dtype) / x.dtype.type(keep)
    return mul(x, Tensor(mask))


# -- normalization --------------------------------------------------------
def standardize(x, axes, eps):
    """(x - mean) / sqrt(var + eps) over ``axes`` using the biased variance."""
    mu = x.data.mean(axis=axes, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=axes, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv

    def backward(g):
        gm = g.mean(axis=axes, keepdims=True)
        gxm = (g * xhat).mean(axis=axes, keepdims=True)
        return (inv * (g - gm - xhat * gxm),)

    return Tensor._result(xhat.astype(x.dtype, copy=False), (x,), backward, "standardize"), mu, var


class RunningStats:
    """Per-channel running mean/variance used by batch normalization at inference."""

    def __init__(self, channels, momentum=0.1, dtype=np.float32):
        self.mean = np.zeros(channels, dtype=dtype)
        self.var = np.ones(channels, dtype=dtype)
        self.momentum = momentum

    def update(self, mu, var):
        m = self.momentum
        self.mean = ((1 - m) * self.mean + m * mu).astype(self.mean.dtype)
        self.var = ((1 - m) * self.var + m * var).astype(self.var.dtype)


def normalize(x, kind, scale=None, shift=None, eps=1e-5, training=True, running=None, channel_axis=1):
    """Batch or layer normalization followed by an optional affine transform.

    ``kind="layer"`` normalizes each sample over the last axis. ``kind="batch"``
    normalizes each channel (``channel_axis``) over every other axis with
    batch statistics while training, or with ``running`` statistics at
    inference, where it reduces to a fixed affine map.
    """
    if kind == "layer":
        y, _, _ = standardize(x, (x.ndim - 1,), eps)
        bshape = (1,) * (x.ndim - 1) + (x.shape[-1],)
    elif kind == "batch":
        axis = channel_axis % x.ndim
        axes = tuple(a for a in range(x.ndim) if a != axis)
        bshape = tuple(x.shape[a] if a == axis else 1 for a in range(x.ndim))
        if training or running is None:
            y, mu, var = standardize(x, axes, eps)
            if training and running is not None:
                running.update(mu.reshape(-1), var.reshape(-1))
        else:
            mu = running.mean.reshape(bshape).astype(x.dtype)
            inv = (1.0 / np.sqrt(running.var.reshape(bshape) + eps)).astype(x.dtype)
            y = mul(add(x, Tensor(-mu)), Tensor(inv))
    else:
        raise ValueError(f"unknown normalization kind {kind!r}")
    if scale is not None:
        y = mul(y, scale.reshape(bshape))
    if shift is not None:
        y = add(y, shift.reshape(bshape))
    return y


# -- gradient reversal ----------------------------------------------------
def grl(x, coefficient=1.0):
    """Identity on the forward pass; multiplies the incoming gradient by -coefficient."""
    if coefficient < 0:
        raise ValueError("GRL coefficient must be non-negative")

    def backward(g):
        return (-coefficient * g,)

    return Tensor._result(x.data.copy(), (x,), backward, "grl")


# -- recurrence -----------------------------------------------------------
def init_lstm(rng, in_dim, hidden, dtype=np.float32):
    """Input, recurrent and bias parameters; gate order is (input, forget, cell, output)."""
    wx = glorot(rng, (in_dim, 4 * hidden), in_dim, 4 * hidden, dtype)
    wh = glorot(rng, (hidden, 4 * hidden), hidden, 4 * hidden, dtype)
    b = np.zeros(4 * hidden, dtype=dtype)
    b[hidden:2 * hidden] = 1.0
    return {"wx": wx, "wh": wh, "b": b}


def lstm_cell(x_t, h, c, params):
    """One LSTM step. x_t: [N, F], h and c: [N, Hd]. Returns (h', c')."""
    wx, wh, b = params["wx"], params["wh"], params["b"]
    hd = wh.shape[0]
    if x_t.shape[-1] != wx.shape[0] or h.shape[-1] != hd or c.shape[-1] != hd:
        raise ValueError(f"lstm extent mismatch: x {x_t.shape}, h {h.shape}, wx {wx.shape}")
    z = add(add(matmul(x_t, wx), matmul(h, wh)), b)
    i = sigmoid(z[:, :hd])
    f = sigmoid(z[:, hd:2 * hd])
    g = tanh(z[:, 2 * hd:3 * hd])
    o = sigmoid(z[:, 3 * hd:])
    c_new = add(mul(f, c), mul(i, g))
    h_new = mul(o, tanh(c_new))
    return h_new, c_new


def lstm_sequence(xs, params, return_sequence=False):
    """Unroll over a list of [N, F] inputs starting from zero state."""
    hd = params["wh"].shape[0]
    n = xs[0].shape[0]
    h = Tensor(np.zeros((n, hd), dtype=xs[0].dtype))
    c = Tensor(np.zeros((n, hd), dtype=xs[0].dtype))
    hs = []
    for x_t in xs:
        h, c = lstm_cell(x_t, h, c, params)
        hs.append(h)
    return hs if return_sequence else h


__all__ = [
    "activate",
    "concat",
    "conv1d",
    "conv_output_length",
    "dense",
    "dropout",
    "glorot",
    "grl",
    "init_lstm",
    "lstm_cell",
    "lstm_sequence",
    "maxpool1d",
    "normalize",
    "RunningStats",
    "same_padding",
    "standardize",
]
