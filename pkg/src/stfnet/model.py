"""The full network: parameter construction and the forward pass for every variant."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cfe import cfe_forward, feature_dims, init_dwcs, init_tis
from .config import ConfigError, check_ablations
from .dal import adversarial_branch, init_domain_head
from .engine import Tensor
from .sps import attention_connectivity, cheb_gcn, fuse_adjacency, init_attention, init_cheb, lambda_mask
from .tes import classify, fuse_temporal, gtn_forward, init_gtn, init_head, init_lnlstm, layernorm_lstm


@dataclass(frozen=True)
class Topology:
    use_tis: bool
    use_lambda: bool
    use_tes: bool
    use_lstm: bool
    use_gtn: bool
    domain_feature: str
    fe: int
    temporal_dim: int
    domain_dim: int


def apply_variant(config, window_len):
    """Resolve ablations and the domain-feature choice into concrete widths."""
    ab = set(config.ablations)
    check_ablations(ab)
    dims = feature_dims(window_len, config.dwcs(), 0 if "tis" in ab else config.ts)
    fe = dims[-1]
    use_tes = "tes" not in ab
    use_lstm = use_tes and "lstm" not in ab
    use_gtn = use_tes and "gtn" not in ab
    temporal = (config.fl if use_lstm else 0) + (config.fg if use_gtn else 0) if use_tes else config.fs
    return Topology(
        use_tis="tis" not in ab,
        use_lambda="lambda_mask" not in ab,
        use_tes=use_tes,
        use_lstm=use_lstm,
        use_gtn=use_gtn,
        domain_feature=config.domain_feature,
        fe=fe,
        temporal_dim=temporal,
        domain_dim=config.fs if config.domain_feature == "spatial" else fe,
    )


class Model:
    """Parameters, batch-norm state and forward pass for one configuration.

    ``adjacency`` is the binary electrode graph; it is required unless the
    lambda mask is ablated.
    """

    def __init__(self, config, n_channels, window_len, adjacency=None, seed=None):
        self.config = config
        self.n_channels = n_channels
        self.window_len = window_len
        self.topology = topo = apply_variant(config, window_len)
        self.dtype = np.dtype(config.dtype)
        self.adjacency = None if adjacency is None else np.asarray(adjacency, dtype=np.float64)
        if topo.use_lambda:
            if self.adjacency is None:
                raise ConfigError("an electrode adjacency matrix is required unless 'lambda_mask' is ablated")
            if self.adjacency.shape != (n_channels, n_channels):
                raise ConfigError(f"adjacency is {self.adjacency.shape}, expected {(n_channels, n_channels)}")
            self.mask = lambda_mask(self.adjacency, config.lam)
        else:
            self.mask = None

        rng = np.random.default_rng(config.seed if seed is None else seed)
        dt = self.dtype
        arrays, state = init_dwcs(rng, n_channels, config.dwcs(), dt)
        if topo.use_tis:
            arrays.update(init_tis(rng, config.ts, dt))
        arrays.update(init_attention(rng, topo.fe, config.heads, dt))
        arrays.update(init_cheb(rng, topo.fe, config.fs, config.cheb_order, dt))
        if topo.use_lstm:
            arrays.update(init_lnlstm(rng, config.fs, config.fl, dt))
        if topo.use_gtn:
            arrays.update(init_gtn(rng, config.n_windows, config.gt_channels, config.gt_layers,
                                   config.fs, config.fg, dt))
        arrays.update(init_head(rng, n_channels * topo.temporal_dim, config.head_hidden, 2, dt))
        dom, dom_state = init_domain_head(rng, n_channels * topo.domain_dim, config.domain_hidden, 2, dt)
        arrays.update(dom)
        state.update(dom_state)
        for stats in state.values():
            stats.momentum = config.bn_momentum
        self.params = {k: Tensor(v, requires_grad=True, name=k) for k, v in arrays.items()}
        self.state = state

    # -- parameters ---------------------------------------------------------
    def named_parameters(self):
        return self.params.items()

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def classifier_keys(self):
        """Parameters downstream of the branch point on the class route only."""
        return [k for k in self.params if k.startswith(("head.", "lstm", "gtn."))]

    def domain_keys(self):
        return [k for k in self.params if k.startswith("dom.")]

    # -- forward ------------------------------------------------------------
    def forward(self, windows, training=False, rng=None, domain=False):
        """windows: [B, T, V, len]. Returns a dict of named outputs.

        ``probs`` [B, 2] is always present; ``domain_probs`` [B, T, 2] only
        with ``domain=True``. Intermediate maps are included for export.
        """
        cfg, topo, P = self.config, self.topology, self.params
        windows = np.asarray(windows)
        if windows.ndim != 4 or windows.shape[1:] != (cfg.n_windows, self.n_channels, self.window_len):
            raise ValueError(f"expected windows [B, {cfg.n_windows}, {self.n_channels}, {self.window_len}], "
                             f"got {windows.shape}")
        f_common = cfe_forward(windows, P, self.state, cfg.dwcs(), cfg.ts, topo.use_tis, training)
        att = attention_connectivity(f_common, P["sps.phi"], P["sps.a"])
        a_fc, adj = fuse_adjacency(att, self.mask)
        f_sps = cheb_gcn(f_common, adj, P["sps.theta"])

        if topo.use_tes:
            f_ll = layernorm_lstm(f_sps, P) if topo.use_lstm else None
            f_gtn = gtn_forward(f_sps, adj, P, cfg.gt_layers) if topo.use_gtn else None
            f_tes = fuse_temporal(f_ll, f_gtn)
        else:
            f_tes = f_sps.mean(axis=1)
        probs = classify(f_tes, P, rng, training, cfg.dropout)
        out = {"f_common": f_common, "A_FC": a_fc, "A": adj, "f_SpS": f_sps, "f_TeS": f_tes, "probs": probs}
        if domain:
            f_dom = f_sps if topo.domain_feature == "spatial" else f_common
            out["domain_probs"] = adversarial_branch(f_dom, P, self.state, training, cfg.grl_coefficient)
        return out

    def predict_proba(self, windows):
        return self.forward(windows, training=False)["probs"].data

    # -- serialization ------------------------------------------------------
    def state_arrays(self):
        arrays = {f"param/{k}": p.data for k, p in self.params.items()}
        for k, s in self.state.items():
            arrays[f"state/{k}/mean"] = s.mean
            arrays[f"state/{k}/var"] = s.var
        return arrays

    def load_state_arrays(self, arrays):
        for k, p in self.params.items():
            src = arrays[f"param/{k}"]
            if src.shape != p.data.shape:
                raise ValueError(f"checkpoint parameter {k} has shape {src.shape}, expected {p.data.shape}")
            p.data = np.array(src, dtype=p.data.dtype)
        for k, s in self.state.items():
            s.mean = np.array(arrays[f"state/{k}/mean"], dtype=s.mean.dtype)
            s.var = np.array(arrays[f"state/{k}/var"], dtype=s.var.dtype)
