"""
Learned connectivity and graph filtering
========================================

Electrode features are compared pairwise to get a row-stochastic
connectivity matrix per attention head. Averaging the heads and
weighting by a soft electrode-distance mask gives the graph on which a
Chebyshev polynomial filter runs.
"""
import numpy as np

from stfnet.datapipe import build_distance_adjacency, ring_layout
from stfnet.engine import Tensor
from stfnet.sps import attention_connectivity, cheb_gcn, chebyshev_polynomials, fuse_adjacency, lambda_mask

rng = np.random.default_rng(1)
v, fe, heads = 6, 5, 3
np.set_printoptions(precision=3, suppress=True)

features = Tensor(rng.normal(size=(v, fe)))
phi = Tensor(rng.normal(size=(heads, fe, fe)) * 0.3)
a = Tensor(rng.normal(size=(fe, 1)))
att = attention_connectivity(features, phi, a)
print("per-head connectivity", att.shape, "row sums", att.data.sum(axis=1).ravel()[:3], "...")

# Electrodes on a ring, each linked to its two nearest neighbours.
adj = build_distance_adjacency(ring_layout(v), "k_nearest", k=2)
mask = lambda_mask(adj, 0.5)
print("mask values:", np.unique(mask))
a_fc, a_graph = fuse_adjacency(att, mask)
print("head-mean connectivity:\n", a_fc.data)
print("after the mask, neighbours weigh 3x more than strangers:\n", a_graph.data)

# The filter applies P_k(L) through the recurrence and never forms P_k.
theta = Tensor(rng.normal(size=(4, fe, 2)))
out = cheb_gcn(features, a_graph, theta).data
lbar = np.diag(a_graph.data.sum(1)) - a_graph.data - np.eye(v)
polys = chebyshev_polynomials(lbar, 3)
direct = sum(p @ features.data @ t for p, t in zip(polys, theta.data))
print("recurrence vs explicit polynomials, max diff:", np.abs(out - direct).max())
