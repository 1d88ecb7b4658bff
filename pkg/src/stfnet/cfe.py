"""Common feature extractor: multi-scale depth-wise convolution plus time-interval embeddings."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datapipe import extract_intervals
from .engine import (
    RunningStats,
    Tensor,
    concat,
    conv1d,
    conv_output_length,
    dense,
    glorot,
    maxpool1d,
    normalize,
    relu,
)

TABLE1_PIPELINES = (
    ((64, 8, "valid"), (16, 2, "valid"), (4, 1, "same"), (8, 1, "same")),
    ((32, 4, "valid"), (8, 2, "valid"), (4, 1, "same"), (8, 1, "same")),
    ((16, 2, "valid"), (4, 2, "valid"), (4, 1, "same"), (8, 1, "same")),
)
# stage index -> max-pool window; batchnorm + relu precede each pool
TABLE1_POOLS = {0: 2, 1: 4, 3: 4}


@dataclass
class DwCSConfig:
    kd: int = 3
    pipelines: tuple = TABLE1_PIPELINES
    pools: dict = field(default_factory=lambda: dict(TABLE1_POOLS))

    def __post_init__(self):
        self.pipelines = tuple(tuple((int(k), int(s), str(p)) for k, s, p in pipe) for pipe in self.pipelines)
        self.pools = {int(k): int(v) for k, v in self.pools.items()}
        if self.kd < 1:
            raise ValueError("kd must be positive")


def pipeline_length(length, stages, pools):
    for s, (ks, stride, padding) in enumerate(stages):
        length = conv_output_length(length, ks, stride, padding) if padding == "same" or ks <= length else 0
        if s in pools:
            length //= pools[s]
        if length < 1:
            return 0
    return length


def feature_dims(length, config=None, ts=0):
    """Per-pipeline output lengths and the common feature width.

    Returns (fl_1, ..., fl_n, FE) with FE = kd * sum(fl) + 4 * ts.
    """
    config = config or DwCSConfig()
    fls = []
    for i, stages in enumerate(config.pipelines):
        fl = pipeline_length(length, stages, config.pools)
        if fl < 1:
            raise ValueError(f"window length {length} collapses scale pipeline {i + 1} to zero length")
        fls.append(fl)
    return (*fls, config.kd * sum(fls) + 4 * ts)


# -- depth-wise convolution sector ----------------------------------------
def init_dwcs(rng, n_channels, config, dtype=np.float32):
    params, state = {}, {}
    kd, v = config.kd, n_channels
    for p, stages in enumerate(config.pipelines):
        for s, (ks, _, _) in enumerate(stages):
            cin_g = 1 if s == 0 else kd
            params[f"dwcs.{p}.{s}.w"] = glorot(rng, (v * kd, cin_g, ks), cin_g * ks, kd * ks, dtype)
            params[f"dwcs.{p}.{s}.b"] = np.zeros(v * kd, dtype=dtype)
            if s in config.pools:
                params[f"dwcs.{p}.{s}.bn_scale"] = np.ones(v * kd, dtype=dtype)
                params[f"dwcs.{p}.{s}.bn_shift"] = np.zeros(v * kd, dtype=dtype)
                state[f"dwcs.{p}.{s}.bn"] = RunningStats(v * kd, dtype=dtype)
    return params, state


def dwcs_forward(x, params, state, config, training=False):
    """x: [N, V, len] -> f_depth [N, V, kd * sum(fl)].

    Every stage is grouped by electrode, so no information crosses EEG
    channels; each electrode's kd feature rows are concatenated.
    """
    n, v, _ = x.shape
    outs = []
    for p, stages in enumerate(config.pipelines):
        h = x
        for s, (_, stride, padding) in enumerate(stages):
            key = f"dwcs.{p}.{s}"
            h = conv1d(h, params[f"{key}.w"], params[f"{key}.b"], stride=stride, padding=padding, groups=v)
            if s in config.pools:
                h = normalize(h, "batch", params[f"{key}.bn_scale"], params[f"{key}.bn_shift"],
                              training=training, running=state.get(f"{key}.bn"), channel_axis=1)
                h = relu(h)
                h = maxpool1d(h, config.pools[s])
        outs.append(h.reshape(n, v, -1))
    return concat(outs, axis=-1)


# -- time-interval sector -------------------------------------------------
def init_tis(rng, ts, dtype=np.float32):
    # odd ts (e.g. 125) narrows to floor(ts / 2)
    half, two = max(ts // 2, 1), 2 * ts

    def lin(name, fin, fout):
        return {f"{name}.w": glorot(rng, (fin, fout), fin, fout, dtype), f"{name}.b": np.zeros(fout, dtype=dtype)}

    params = {}
    params.update(lin("tis.start", ts, two))
    params.update(lin("tis.end", ts, two))
    params.update(lin("tis.proj", two, ts))
    params.update(lin("tis.expand.in", ts, two))
    params.update(lin("tis.expand.out", two, ts))
    params.update(lin("tis.contract.in", ts, half))
    params.update(lin("tis.contract.out", half, ts))
    return params


def _lin(x, params, name):
    return dense(x, params[f"{name}.w"], params[f"{name}.b"])


def twae(x, params):
    """Two-way autoencoder: a widening way and a narrowing way, both back to ts, concatenated."""
    wide = _lin(relu(_lin(x, params, "tis.expand.in")), params, "tis.expand.out")
    narrow = _lin(relu(_lin(x, params, "tis.contract.in")), params, "tis.contract.out")
    return concat([wide, narrow], axis=-1)


def tis_forward(intervals, first_start, last_end, params):
    """Embeddings of the unpaired boundary slices and of every time interval.

    intervals: [B, T-1, V, 2ts]; first_start, last_end: [B, V, ts].
    Returns f_start, f_end [B, 1, V, 2ts] and f_interval [B, T-1, V, 2ts].
    """
    f_start = _lin(first_start, params, "tis.start")
    f_end = _lin(last_end, params, "tis.end")
    f_interval = twae(_lin(intervals, params, "tis.proj"), params)
    b, v, w = f_start.shape
    return f_start.reshape(b, 1, v, w), f_end.reshape(b, 1, v, w), f_interval


def assemble_common(f_depth, f_start, f_end, f_interval):
    """Per-window concatenation of depth features with the neighbouring interval embeddings.

    Window 1 gets (start, interval 1), window t gets (interval t-1, interval t)
    and window T gets (interval T-1, end).
    """
    if f_depth.shape[1] < 2:
        raise ValueError("at least two time windows are required")
    left = concat([f_start, f_interval], axis=1)
    right = concat([f_interval, f_end], axis=1)
    return concat([f_depth, left, right], axis=-1)


def cfe_forward(windows, params, state, config, ts, use_tis=True, training=False):
    """windows: [B, T, V, len] array -> f_common [B, T, V, FE]."""
    windows = np.asarray(windows)
    b, t, v, length = windows.shape
    if t < 2:
        raise ValueError("at least two time windows are required")
    dtype = params[next(iter(params))].dtype
    x = Tensor(windows.reshape(b * t, v, length).astype(dtype, copy=False))
    f_depth = dwcs_forward(x, params, state, config, training).reshape(b, t, v, -1)
    if not use_tis:
        return f_depth
    intervals, first_start, last_end = extract_intervals(windows, ts)
    f_start, f_end, f_interval = tis_forward(
        Tensor(intervals.astype(dtype)), Tensor(first_start.astype(dtype)), Tensor(last_end.astype(dtype)), params)
    return assemble_common(f_depth, f_start, f_end, f_interval)
