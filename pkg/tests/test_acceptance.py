"""Acceptance criteria, one PASS/FAIL line each.

Run with pytest (lines appear in the terminal summary) or directly:
    python3 tests/test_acceptance.py
"""
import json
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import ACCEPTANCE_LINES, MINI, cycle_adjacency, mini_config  # noqa: E402
from stfnet.cfe import feature_dims  # noqa: E402
from stfnet.cli import dispatch  # noqa: E402
from stfnet.config import parse_config  # noqa: E402
from stfnet.datapipe import (  # noqa: E402
    SynthSpec,
    build_distance_adjacency,
    ring_layout,
    synth_recordings,
    tenfold_split,
)
from stfnet.engine import Tensor  # noqa: E402
from stfnet.metrics import pam  # noqa: E402
from stfnet.sps import attention_connectivity, cheb_gcn, chebyshev_polynomials, fuse_adjacency, lambda_mask  # noqa: E402
from stfnet.tes import gt_metapaths  # noqa: E402
from stfnet.trainer import FoldTrainer, predict_batch, prepare_sample, run_cv  # noqa: E402


def record(number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_c01_dimension_anchors():
    cfg = parse_config()
    big = feature_dims(12500, cfg.dwcs(), 125)[-1]
    small = feature_dims(3750, cfg.dwcs(), 75)[-1]
    record(1, (big, small) == (1004, 447), f"FE(12500, ts=125)={big}, FE(3750, ts=75)={small}; expected 1004, 447")


def test_c02_full_scale_accuracy():
    line = "SKIP criterion 2: full-scale accuracy targets need access-restricted recordings; covered by 7, 8 and 11"
    ACCEPTANCE_LINES.append(line)
    pytest.skip(line)


def test_c03_gradient_suite():
    from gradsuite import cfe_report, cfe_sps_report, full_model_report, primitive_reports

    start = time.perf_counter()
    prims = primitive_reports(0)
    composites = {"cfe": cfe_report(), "cfe+sps": cfe_sps_report(), "full(B=1)": full_model_report(batch=1)}
    elapsed = time.perf_counter() - start
    reports = {**prims, **composites}
    bad = sorted(k for k, r in reports.items() if not r.ok)
    worst = max(r.max_error for r in reports.values())
    ok = not bad and elapsed < 120
    record(3, ok, f"{len(prims)} primitives + 3 composites, worst rel err {worst:.2e} (<= 1e-4), "
                  f"{elapsed:.1f}s (< 120s){'; failing: ' + ', '.join(bad) if bad else ''}")


def test_c04_connectivity_invariants():
    rng = np.random.default_rng(4)
    start = time.perf_counter()
    n_att = n_mask = n_mp = 0
    worst_att = worst_mp = 0.0
    mask_ok = True
    for batch in range(100):
        dtype = np.float32 if batch % 2 else np.float64
        b, v, fe, h = 100, int(rng.integers(2, 13)), int(rng.integers(1, 9)), int(rng.integers(1, 5))
        f = rng.normal(0, rng.uniform(0.1, 10), size=(b, v, fe)).astype(dtype)
        phi = rng.normal(size=(h, fe, fe)).astype(dtype)
        a = rng.normal(size=(fe, 1)).astype(dtype)
        adj = np.triu(rng.integers(0, 2, size=(b, v, v)), 1)
        adj = (adj + adj.transpose(0, 2, 1)).astype(float)
        lam = float(rng.uniform(1e-3, 1.0))
        mask = np.stack([lambda_mask(m, lam) for m in adj])
        a_fc, _ = fuse_adjacency(attention_connectivity(Tensor(f), Tensor(phi), Tensor(a)), mask)
        worst_att = max(worst_att, float(np.abs(a_fc.data.sum(-1) - 1).max()))
        mask_ok &= bool(np.all(np.isclose(mask, 1 + lam, rtol=0, atol=0) | np.isclose(mask, 1 - lam, rtol=0, atol=0)))
        mask_ok &= bool(np.array_equal(mask == 1 + lam, adj == 1))
        n_att += b
        n_mask += b

        t, c = int(rng.integers(1, 6)), int(rng.integers(1, 4))
        adjs = rng.uniform(0, 1, size=(b, t, v, v)) * (rng.random((b, t, v, v)) < 0.5)
        kernels = [Tensor(rng.normal(0, 1, size=(c, t)).astype(dtype)) for _ in range(int(rng.integers(2, 4)))]
        mp = gt_metapaths(Tensor(adjs.astype(dtype)), kernels).data
        rows = mp.sum(-1)
        live = rows > 1e-6
        if live.any():
            worst_mp = max(worst_mp, float(np.abs(rows[live] - 1).max()))
        n_mp += b
    elapsed = time.perf_counter() - start
    ok = worst_att <= 1e-6 and mask_ok and worst_mp <= 1e-6 and elapsed < 60
    record(4, ok, f"{n_att} A_FC / {n_mask} A_lambda / {n_mp} meta-path instances: "
                  f"row err {worst_att:.1e}, mask values {'exact' if mask_ok else 'WRONG'}, "
                  f"meta-path row err {worst_mp:.1e}, {elapsed:.1f}s")


def _cheb_direct(m, k):
    from numpy.polynomial import chebyshev

    coeffs = chebyshev.cheb2poly([0] * k + [1])
    return sum(c * np.linalg.matrix_power(m, i) for i, c in enumerate(coeffs))


def test_c05_chebyshev_oracle():
    rng = np.random.default_rng(5)
    worst = 0.0
    for trial in range(1000):
        k = int(rng.integers(0, 5))
        if trial % 2:
            m = rng.uniform(-1, 1, size=(4, 4))
            polys = chebyshev_polynomials(m, k)
            worst = max(worst, max(float(np.abs(polys[j] - _cheb_direct(m, j)).max()) for j in range(k + 1)))
        else:
            adj = rng.uniform(0, 1, size=(4, 4))
            lbar = np.diag(adj.sum(-1)) - adj - np.eye(4)
            f, theta = rng.normal(size=(4, 3)), rng.normal(size=(k + 1, 3, 2))
            got = cheb_gcn(Tensor(f), Tensor(adj), Tensor(theta)).data
            expect = sum(_cheb_direct(lbar, j) @ f @ theta[j] for j in range(k + 1))
            worst = max(worst, float(np.abs(got - expect).max()))
    record(5, worst <= 1e-8, f"1000 trials, K <= 4, 4x4: max abs err {worst:.1e} (<= 1e-8)")


def test_c06_grl_contract():
    from gradsuite import grl_contract_errors

    errs = {f: grl_contract_errors(domain_feature=f) for f in ("spatial", "common")}
    worst = max(max(e.values()) for e in errs.values())
    record(6, worst <= 1e-6, f"combined pass vs d(loss_c) - d(loss_d): max abs err {worst:.1e} (<= 1e-6)")


LEARN_SEEDS = range(5)


def learnability_run(seed, epochs=50):
    recs = synth_recordings(SynthSpec(n_subjects=12, n_channels=8, sample_rate=250, duration_s=16,
                                      class_separation=5.0, seed=seed))
    cfg = parse_config({"n_windows": 4, "ts": 24, "epochs": epochs, "seed": seed})
    samples = [prepare_sample(r, 4) for r in recs]
    held = [next(s for s in samples if s.label == c) for c in (0, 1)]
    train = [s for s in samples if s not in held]
    adj = build_distance_adjacency(ring_layout(8), "k_nearest", k=2)
    model = FoldTrainer(cfg, train, held, adj).run().model
    train_acc = float(np.mean(predict_batch(model, train)[0] == [s.label for s in train]))
    held_acc = float(np.mean(predict_batch(model, held)[0] == [s.label for s in held]))
    return train_acc, held_acc


def test_c07_learnability():
    start = time.perf_counter()
    runs = [learnability_run(s) for s in LEARN_SEEDS]
    good = sum(tr >= 0.95 and ho > 0.5 for tr, ho in runs)
    detail = ", ".join(f"({tr:.2f}, {ho:.2f})" for tr, ho in runs)
    record(7, good >= 4, f"{good}/5 seeds reach train acc >= 0.95 and held-out > 0.5 "
                         f"[(train, held-out): {detail}], {time.perf_counter() - start:.0f}s")


def test_c08_chance_floor():
    from scipy.stats import binom

    cfg = mini_config(epochs=3)
    recs = synth_recordings(SynthSpec(n_subjects=20, n_channels=4, sample_rate=256, duration_s=3,
                                      class_separation=0.0, seed=8))
    report = run_cv(cfg, recs, cycle_adjacency(4))
    n = len(report.predictions)
    lo, hi = binom.interval(0.95, n, 0.5)
    acc = report.metrics.acc
    record(8, lo / n <= acc <= hi / n, f"separation 0, {n} subjects: pooled acc {acc:.2f} in [{lo / n:.2f}, {hi / n:.2f}]")


def test_c09_split_remainders():
    sizes = {}
    for n in (52, 53):
        plan = tenfold_split([f"s{i}" for i in range(n)], seed=0)
        sizes[n] = sorted((len(g) for g in plan.groups), reverse=True)
    ok = sizes[52] == [6, 6] + [5] * 8 and sizes[53] == [6] * 3 + [5] * 7
    record(9, ok, f"52 -> {sizes[52].count(6)} groups of 6; 53 -> {sizes[53].count(6)} groups of 6")


def test_c10_pam():
    ones = pam(1, 1, 1, 1, 1, 1)
    half = pam(*[0.5] * 6)
    rng = np.random.default_rng(10)
    monotone = True
    for _ in range(10_000):
        x = rng.random(6)
        i = rng.integers(6)
        y = x.copy()
        y[i] = rng.uniform(x[i], 1.0)
        monotone &= pam(*y) >= pam(*x) - 1e-12
    ok = abs(ones - 1) <= 1e-4 and abs(half - 0.25) <= 1e-4 and monotone
    record(10, ok, f"PAM(ones)={ones:.6f}, PAM(0.5)={half:.6f}, monotone on 10000 points: {monotone}")


def test_c11_determinism(tmp_path):
    data = tmp_path / "data"
    dispatch(["synth", "--out", str(data), "--n-subjects", "12", "--channels", "4", "--sample-rate", "256",
              "--duration", "3", "--seed", "11"])
    (tmp_path / "cfg.json").write_text(json.dumps(dict(MINI, dataset=str(data), epochs=2, seed=11)))
    codes = [dispatch(["cv", "--config", str(tmp_path / "cfg.json"), "--out", str(tmp_path / d)]) for d in "ab"]
    same = (tmp_path / "a" / "metrics.json").read_bytes() == (tmp_path / "b" / "metrics.json").read_bytes()
    record(11, codes == [0, 0] and same, f"two cv runs exit {codes}, metrics JSON byte-identical: {same}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
