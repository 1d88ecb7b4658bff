import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stfnet.cfe import (
    DwCSConfig,
    assemble_common,
    cfe_forward,
    dwcs_forward,
    feature_dims,
    init_dwcs,
    init_tis,
    tis_forward,
)
from stfnet.engine import Tensor

from conftest import MINI


def T(a):
    return Tensor(np.asarray(a, dtype=np.float64))


def mini_dwcs(kd=1):
    return DwCSConfig(kd=kd, pipelines=MINI["dwcs_pipelines"], pools=MINI["dwcs_pools"])


def test_anchor_dims():
    assert feature_dims(12500, DwCSConfig(kd=3), 125) == (23, 48, 97, 1004)
    assert feature_dims(3750, DwCSConfig(kd=3), 75) == (6, 14, 29, 447)
    assert feature_dims(12500, DwCSConfig(kd=3), 0)[-1] == 504


def test_too_short_window():
    with pytest.raises(ValueError, match="collapses"):
        feature_dims(100, DwCSConfig())


@settings(max_examples=25, deadline=None)
@given(length=st.integers(64, 400), kd=st.integers(1, 3), ts=st.integers(1, 8), v=st.integers(1, 3))
def test_realized_width_matches_dims(length, kd, ts, v):
    cfg = mini_dwcs(kd)
    try:
        dims = feature_dims(length, cfg, ts)
    except ValueError:
        return
    if 2 * ts > length:
        return
    rng = np.random.default_rng(length)
    params, state = init_dwcs(rng, v, cfg, np.float64)
    params.update(init_tis(rng, ts, np.float64))
    params = {k: T(p) for k, p in params.items()}
    f = cfe_forward(rng.normal(size=(1, 2, v, length)), params, state, cfg, ts)
    assert f.shape == (1, 2, v, dims[-1])
    f_depth = dwcs_forward(T(rng.normal(size=(2, v, length))), params, state, cfg)
    assert f_depth.shape == (2, v, kd * sum(dims[:-1]))


def test_depthwise_isolation():
    cfg = mini_dwcs(2)
    rng = np.random.default_rng(0)
    params, state = init_dwcs(rng, 4, cfg, np.float64)
    params = {k: T(p) for k, p in params.items()}
    x = rng.normal(size=(1, 4, 256))
    # inference mode: batchnorm uses fixed statistics, so rows cannot couple through it
    base = dwcs_forward(T(x), params, state, cfg).data
    x[0, 1] += rng.normal(size=256)
    moved = dwcs_forward(T(x), params, state, cfg).data
    np.testing.assert_array_equal(np.any(base != moved, axis=-1)[0], [False, True, False, False])


def test_two_stage_identity_trace():
    # one pipeline: identity kernel, then pool 2; kd=1. Inference batchnorm with
    # unit running variance and zero mean leaves x / sqrt(1 + eps).
    cfg = DwCSConfig(kd=1, pipelines=[[[1, 1, "valid"], [1, 1, "valid"]]], pools={0: 2})
    params, state = init_dwcs(np.random.default_rng(0), 2, cfg, np.float64)
    params["dwcs.0.0.w"][:] = 1.0
    params["dwcs.0.1.w"][:] = 1.0
    x = np.random.default_rng(1).normal(size=(1, 2, 10))
    out = dwcs_forward(T(x), {k: T(p) for k, p in params.items()}, state, cfg).data
    pooled = np.maximum(x, 0).reshape(1, 2, 5, 2).max(axis=-1) / np.sqrt(1 + 1e-5)
    np.testing.assert_allclose(out, pooled, atol=1e-12)


def tis_params(ts, seed=0):
    return {k: T(v) for k, v in init_tis(np.random.default_rng(seed), ts, np.float64).items()}


def test_tis_zero_in_zero_out():
    p = tis_params(4)
    s, e, iv = tis_forward(T(np.zeros((1, 2, 3, 8))), T(np.zeros((1, 3, 4))), T(np.zeros((1, 3, 4))), p)
    for out in (s, e, iv):
        np.testing.assert_array_equal(out.data, 0.0)


def test_tis_widths_and_distinct_boundaries():
    ts = 6
    p = tis_params(ts)
    rng = np.random.default_rng(1)
    a, b = rng.normal(size=(1, 2, ts)), rng.normal(size=(1, 2, ts))
    s, e, iv = tis_forward(T(rng.normal(size=(1, 3, 2, 2 * ts))), T(a), T(b), p)
    assert s.shape == e.shape == (1, 1, 2, 2 * ts) and iv.shape == (1, 3, 2, 2 * ts)
    s2, e2, _ = tis_forward(T(rng.normal(size=(1, 3, 2, 2 * ts))), T(b), T(a), p)
    assert not np.allclose(s.data, e2.data) and not np.allclose(e.data, s2.data)


@pytest.mark.parametrize("ts", [4, 5, 125])
def test_odd_interval_length(ts):
    p = tis_params(ts)
    assert p["tis.contract.in.w"].shape == (ts, ts // 2)
    _, _, iv = tis_forward(T(np.ones((1, 1, 1, 2 * ts))), T(np.ones((1, 1, ts))), T(np.ones((1, 1, ts))), p)
    assert iv.shape[-1] == 2 * ts


def test_both_autoencoder_ways_get_gradient():
    p = tis_params(4, seed=3)
    for t in p.values():
        t.requires_grad = True
    _, _, iv = tis_forward(T(np.random.default_rng(2).normal(size=(2, 3, 2, 8))), T(np.ones((2, 2, 4))),
                           T(np.ones((2, 2, 4))), p)
    (iv * iv).sum().backward()
    for way in ("expand", "contract"):
        assert np.abs(p[f"tis.{way}.in.w"].grad).sum() > 0
        assert np.abs(p[f"tis.{way}.out.w"].grad).sum() > 0


def test_assembly_order():
    b, t, v = 1, 3, 2
    depth = T(np.full((b, t, v, 1), -1.0))
    start = T(np.full((b, 1, v, 1), 10.0))
    end = T(np.full((b, 1, v, 1), 20.0))
    iv = T(np.arange(1.0, t).reshape(1, t - 1, 1, 1) * np.ones((b, t - 1, v, 1)))
    f = assemble_common(depth, start, end, iv).data
    np.testing.assert_array_equal(f[0, :, 0], [[-1, 10, 1], [-1, 1, 2], [-1, 2, 20]])
    # interval 1 appears in exactly windows 1 and 2
    assert [1.0 in row for row in f[0, :, 0]] == [True, True, False]
    with pytest.raises(ValueError):
        assemble_common(T(np.zeros((1, 1, 2, 1))), start, end, T(np.zeros((1, 0, 2, 1))))
