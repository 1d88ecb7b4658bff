"""Temporal sector: layernorm-LSTM over windows, meta-path graph transformer, class head."""
from __future__ import annotations

import numpy as np

from .engine import (
    Tensor,
    concat,
    dense,
    dropout,
    glorot,
    init_lstm,
    leaky_relu,
    lstm_cell,
    matmul,
    mul,
    normalize,
    relu,
    softmax,
    sqrt,
    transpose,
)

DEGREE_EPS = 1e-8


# -- layernorm-LSTM -------------------------------------------------------
def init_lnlstm(rng, fs, fl, dtype=np.float32):
    params = {f"lstm1.{k}": v for k, v in init_lstm(rng, fs, fl, dtype).items()}
    params.update({f"lstm2.{k}": v for k, v in init_lstm(rng, fl, fl, dtype).items()})
    params["lstm.ln_scale"] = np.ones(fl, dtype=dtype)
    params["lstm.ln_shift"] = np.zeros(fl, dtype=dtype)
    return params


def _unit(params, prefix):
    return {k: params[f"{prefix}.{k}"] for k in ("wx", "wh", "b")}


def layernorm_lstm(f_sps, params):
    """f_sps: [B, T, V, FS] -> f_LL [B, V, FL].

    Each node's window sequence runs through LSTM 1, a layer norm on its
    hidden states, then LSTM 2; the last hidden state passes a relu.
    """
    b, t, v, fs = f_sps.shape
    seq = transpose(f_sps, (0, 2, 1, 3)).reshape(b * v, t, fs)
    u1, u2 = _unit(params, "lstm1"), _unit(params, "lstm2")
    hd = u1["wh"].shape[0]
    zeros = Tensor(np.zeros((b * v, hd), dtype=f_sps.dtype))
    h1, c1, h2, c2 = zeros, zeros, zeros, zeros
    for step in range(t):
        h1, c1 = lstm_cell(seq[:, step], h1, c1, u1)
        x2 = normalize(h1, "layer", params["lstm.ln_scale"], params["lstm.ln_shift"])
        h2, c2 = lstm_cell(x2, h2, c2, u2)
    return relu(h2).reshape(b, v, hd)


# -- graph transformer ----------------------------------------------------
def gtn_kernel_names(layers):
    return ["gtn.w1_1", "gtn.w1_2"] + [f"gtn.w{l}" for l in range(2, layers + 1)]


def init_gtn(rng, n_windows, channels, layers, fs, fg, dtype=np.float32):
    params = {name: rng.normal(0.0, 0.01, size=(channels, n_windows)).astype(dtype)
              for name in gtn_kernel_names(layers)}
    params["gtn.alpha"] = np.full(layers + 1, 1.0 / (layers + 1), dtype=dtype)
    params["gtn.W"] = glorot(rng, (fs, fg), fs, fg, dtype)
    return params


def mix_windows(x, kernel):
    """Convex combination over the window axis: x [B, T, ...], kernel [C, T] -> [B, C, ...]."""
    b, t = x.shape[:2]
    rest = x.shape[2:]
    w = softmax(kernel, axis=-1)
    return matmul(w, x.reshape(b, t, -1)).reshape(b, kernel.shape[0], *rest)


def row_normalize(m):
    """D^-1 M with D the row-degree matrix.

    Degrees below DEGREE_EPS are lifted to it (a constant offset, so the
    gradient is that of the raw degree); every other row sums to exactly one.
    """
    deg = m.sum(axis=-1, keepdims=True)
    lift = np.where(deg.data < DEGREE_EPS, DEGREE_EPS - deg.data, 0.0).astype(deg.dtype)
    return m / (deg + Tensor(lift))


def gt_metapaths(adjs, kernels, return_all=False):
    """Meta-path adjacency after len(kernels) - 1 graph transformer layers.

    adjs: [B, T, V, V]; kernels: [W_1_1, W_1_2, W_2, ...], each [C, T].
    Mp_1 = Q_1_1 Q_1_2, Mp_l = Q_l Mp_{l-1}, each row-normalized. Returns [B, C, V, V].
    """
    mp = row_normalize(matmul(mix_windows(adjs, kernels[0]), mix_windows(adjs, kernels[1])))
    history = [mp]
    for k in kernels[2:]:
        mp = row_normalize(matmul(mix_windows(adjs, k), mp))
        history.append(mp)
    return history if return_all else mp


def gtn_features(f_sps, mp, kernels, alpha, weight, slope=0.01):
    """relu(sum_c leakyrelu(D^-1/2 (Mp_c + I) D^-1/2 f_GT_c W)) -> [B, V, FG].

    f_GT is the alpha-weighted sum of the feature maps produced by applying
    every graph transformer kernel to f_sps along the window axis.
    """
    f_gt = None
    for i, k in enumerate(kernels):
        term = mul(alpha[i], mix_windows(f_sps, k))
        f_gt = term if f_gt is None else f_gt + term
    v = mp.shape[-1]
    mp_bar = mp + Tensor(np.eye(v, dtype=mp.dtype))
    d = 1.0 / sqrt(mp_bar.sum(axis=-1, keepdims=True) + DEGREE_EPS)  # [B, C, V, 1]
    b, c = mp.shape[:2]
    norm = mul(mul(d, mp_bar), d.reshape(b, c, 1, v))
    out = leaky_relu(matmul(matmul(norm, f_gt), weight), slope)
    return relu(out.sum(axis=1))


def gtn_forward(f_sps, adjs, params, layers):
    kernels = [params[n] for n in gtn_kernel_names(layers)]
    mp = gt_metapaths(adjs, kernels)
    return gtn_features(f_sps, mp, kernels, params["gtn.alpha"], params["gtn.W"])


# -- class head -----------------------------------------------------------
def init_head(rng, in_dim, hidden=64, classes=2, dtype=np.float32, prefix="head"):
    return {
        f"{prefix}.w1": glorot(rng, (in_dim, hidden), in_dim, hidden, dtype),
        f"{prefix}.b1": np.zeros(hidden, dtype=dtype),
        f"{prefix}.w2": glorot(rng, (hidden, classes), hidden, classes, dtype),
        f"{prefix}.b2": np.zeros(classes, dtype=dtype),
    }


def classify(f_tes, params, rng=None, training=False, rate=0.5):
    """Flatten [B, V, FT] -> dense 64 -> relu -> dropout -> dense 2 -> softmax."""
    b = f_tes.shape[0]
    h = relu(dense(f_tes.reshape(b, -1), params["head.w1"], params["head.b1"]))
    h = dropout(h, rate, rng, training)
    return softmax(dense(h, params["head.w2"], params["head.b2"]), axis=-1)


def fuse_temporal(f_ll, f_gtn):
    """f_TeS = concat(f_LL, f_GTN) along features; either branch may be absent."""
    parts = [p for p in (f_ll, f_gtn) if p is not None]
    return parts[0] if len(parts) == 1 else concat(parts, axis=-1)
