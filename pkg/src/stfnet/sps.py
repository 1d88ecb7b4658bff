"""Spatial sector: attention connectivity, electrode-distance mask fusion, Chebyshev graph convolution."""
from __future__ import annotations

import numpy as np

from .engine import Tensor, glorot, leaky_relu, matmul, mul, softmax, tabs, transpose


def lambda_mask(adj, lam):
    """Soft electrode mask: connected (1) becomes 1 + lam, disconnected (0) becomes 1 - lam."""
    adj = np.asarray(adj, dtype=np.float64)
    if not 0 < lam <= 1:
        raise ValueError(f"lambda must lie in (0, 1], got {lam}")
    if not np.isin(adj, (0.0, 1.0)).all():
        raise ValueError("lambda_mask expects a binary adjacency matrix")
    return np.where(adj == 1.0, 1.0 + lam, 1.0 - lam)


def init_attention(rng, fe, heads, dtype=np.float32):
    phi = np.stack([glorot(rng, (fe, fe), fe, fe, dtype) for _ in range(heads)])
    return {"sps.phi": phi, "sps.a": glorot(rng, (fe, 1), fe, 1, dtype)}


def attention_connectivity(f, phi, a, slope=0.2):
    """Row-stochastic connectivity per head.

    f: [..., V, FE]; phi: [H, FE, FE]; a: [FE, 1]. Entry (i, j, h) is the
    softmax over j of leakyrelu(|phi_h f_i - phi_h f_j| . a). Returns [..., V, V, H].
    """
    lead = f.shape[:-2]
    v, fe = f.shape[-2:]
    h = phi.shape[0]
    proj = matmul(f.reshape(*lead, 1, v, fe), phi)  # [..., H, V, FE]
    diff = proj.reshape(*lead, h, v, 1, fe) - proj.reshape(*lead, h, 1, v, fe)
    logits = matmul(tabs(diff), a).reshape(*lead, h, v, v)
    att = softmax(leaky_relu(logits, slope), axis=-1)
    nd = att.ndim
    return transpose(att, tuple(range(nd - 3)) + (nd - 2, nd - 1, nd - 3))


def fuse_adjacency(att, mask=None):
    """Head-mean connectivity A_FC and, if a mask is given, its Hadamard product with it.

    att: [..., V, V, H]. Returns (A_FC, A), both [..., V, V].
    """
    a_fc = att.mean(axis=-1)
    if mask is None:
        return a_fc, a_fc
    return a_fc, mul(a_fc, Tensor(np.asarray(mask, dtype=a_fc.dtype)))


def scaled_laplacian(adj):
    """L - I with L = D - A (largest eigenvalue taken as 2). Plain numpy, for inspection and tests."""
    adj = np.asarray(adj)
    deg = adj.sum(axis=-1)
    eye = np.eye(adj.shape[-1])
    return deg[..., :, None] * eye - adj - eye


def chebyshev_polynomials(m, order):
    """[P_0(m), ..., P_order(m)] by the three-term recurrence P_k = 2 m P_{k-1} - P_{k-2}."""
    m = np.asarray(m, dtype=np.float64)
    eye = np.broadcast_to(np.eye(m.shape[-1]), m.shape).copy()
    polys = [eye]
    if order >= 1:
        polys.append(m.copy())
    for _ in range(2, order + 1):
        polys.append(2 * m @ polys[-1] - polys[-2])
    return polys


def init_cheb(rng, fe, fs, order, dtype=np.float32):
    theta = np.stack([glorot(rng, (fe, fs), fe, fs, dtype) for _ in range(order + 1)])
    return {"sps.theta": theta}


def cheb_gcn(f, adj, theta):
    """sum_k P_k(L_bar) f theta_k with L_bar = D - A - I.

    f: [..., V, FE]; adj: [..., V, V] (used as given, no symmetrization);
    theta: [K+1, FE, FS]. The polynomial is applied to the features through
    the recurrence, never formed as a matrix.
    """
    order = theta.shape[0] - 1
    deg = adj.sum(axis=-1, keepdims=True)  # [..., V, 1]

    def lbar(z):
        return mul(deg, z) - matmul(adj, z) - z

    z_prev = f
    out = matmul(f, theta[0])
    if order >= 1:
        z = lbar(f)
        out = out + matmul(z, theta[1])
        for k in range(2, order + 1):
            z, z_prev = 2.0 * lbar(z) - z_prev, z
            out = out + matmul(z, theta[k])
    return out
