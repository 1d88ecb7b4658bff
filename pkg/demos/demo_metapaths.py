"""
Composing graphs across time windows
====================================

Each window has its own learned graph. A graph-transformer layer mixes
the windows with a softmax kernel and multiplies the mixtures, so a
meta-path can hop through the graph of one window and then another.
Rows are renormalized after every product.
"""
import numpy as np

from stfnet.engine import Tensor
from stfnet.tes import gt_metapaths

rng = np.random.default_rng(2)
b, t, v, c = 1, 4, 5, 2
np.set_printoptions(precision=3, suppress=True)

graphs = rng.uniform(size=(b, t, v, v)) * (rng.random((b, t, v, v)) < 0.6)
kernels = [Tensor(rng.normal(size=(c, t))) for _ in range(3)]
paths = gt_metapaths(Tensor(graphs), kernels, return_all=True)
for depth, mp in enumerate(paths, start=1):
    print(f"after layer {depth}: shape {mp.shape}, row sums {mp.data[0, 0].sum(1)}")

# A sharp kernel picks a single window. With two layers both picking
# window 0, the meta-path is the row-normalized square of that graph.
sharp = np.full((1, t), -50.0)
sharp[0, 0] = 50.0
mp = gt_metapaths(Tensor(graphs), [Tensor(sharp), Tensor(sharp)]).data[0, 0]
sq = graphs[0, 0] @ graphs[0, 0]
print("matches A_0 @ A_0 normalized:", np.allclose(mp, sq / sq.sum(1, keepdims=True)))
