import numpy as np
import pytest

from stfnet.engine import Tensor, check_gradients, grl, relative_error

from gradsuite import cfe_report, cfe_sps_report, full_model_report, primitive_reports


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_every_primitive(seed):
    reps = primitive_reports(seed)
    bad = {name: str(r) for name, r in reps.items() if not r.ok}
    assert not bad, bad


def test_cfe_composite():
    rep = cfe_report()
    assert rep.ok, str(rep)


def test_cfe_sps_composite():
    rep = cfe_sps_report()
    assert rep.ok, str(rep)


@pytest.mark.parametrize("batch", [1, 2])
@pytest.mark.parametrize("domain_feature", ["spatial", "common"])
def test_full_model(domain_feature, batch):
    rep = full_model_report(domain_feature=domain_feature, batch=batch)
    assert rep.ok, str(rep)


def test_constant_graph_has_zero_gradient():
    p = {"x": Tensor(np.ones(3))}
    rep = check_gradients(lambda: (p["x"] * 0.0).sum() + 2.0, p)
    np.testing.assert_array_equal(p["x"].grad, 0.0)
    assert rep.ok


def test_reversal_flagged_against_raw_loss():
    # the backprop gradient through a GRL disagrees with the raw loss's finite differences...
    p = {"x": Tensor(np.array([0.3, -1.2]))}
    w = Tensor(np.array([1.5, 2.0]))
    raw = check_gradients(lambda: (grl(p["x"]) * w).sum(), p)
    assert not raw.ok
    # ...and matches the reversed expectation
    rev = check_gradients(lambda: (grl(p["x"]) * w).sum(), p, reference={"x": lambda: -(p["x"] * w).sum()})
    assert rev.ok


def test_rejects_single_precision():
    with pytest.raises(TypeError):
        check_gradients(lambda: None, {"x": Tensor(np.ones(2, dtype=np.float32))})


def test_relative_error_floor():
    assert relative_error([0.0], [1e-11]) < 1e-5
    assert relative_error([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert relative_error([1.0], [2.0]) == pytest.approx(0.5)
