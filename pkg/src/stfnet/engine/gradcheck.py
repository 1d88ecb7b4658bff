"""Central finite-difference verification of analytic gradients."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class GradReport:
    errors: dict = field(default_factory=dict)
    tolerance: float = 1e-4

    @property
    def failed(self):
        return {k: v for k, v in self.errors.items() if v > self.tolerance}

    @property
    def ok(self):
        return not self.failed

    @property
    def max_error(self):
        return max(self.errors.values(), default=0.0)

    def __str__(self):
        lines = [f"{name}: {err:.3e}{'  FAIL' if err > self.tolerance else ''}" for name, err in self.errors.items()]
        return "\n".join(lines)


def relative_error(analytic, numeric, floor=1e-5):
    """||a - n|| / max(||a||, ||n||, floor) over one parameter group.

    The floor turns the check into an absolute one (|a - n| <= tol * floor)
    for gradients that vanish identically, e.g. a bias feeding batchnorm,
    where central differences only return roundoff.
    """
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    denom = max(np.linalg.norm(a), np.linalg.norm(n), floor)
    return float(np.linalg.norm(a - n) / denom)


def numeric_gradient(loss_fn, param, epsilon=1e-5, indices=None):
    """Central differences (f(p+e) - f(p-e)) / 2e for selected flat indices of ``param``."""
    flat = param.data.reshape(-1)
    if indices is None:
        indices = np.arange(flat.size)
    out = np.empty(len(indices))
    for j, i in enumerate(indices):
        orig = flat[i]
        flat[i] = orig + epsilon
        up = float(loss_fn().data)
        flat[i] = orig - epsilon
        down = float(loss_fn().data)
        flat[i] = orig
        out[j] = (up - down) / (2 * epsilon)
    return out


def check_gradients(loss_fn, params, epsilon=1e-5, tolerance=1e-4, max_entries=None, seed=0, reference=None):
    """Compare backprop gradients of a scalar ``loss_fn()`` against central differences.

    ``params`` maps names to float64 leaf tensors that ``loss_fn`` reads.
    ``max_entries`` caps how many coordinates of each parameter are probed
    (chosen at random with ``seed``); ``None`` probes all of them.

    ``reference`` optionally maps a parameter name to the scalar function
    whose finite differences the backprop gradient should equal. Graphs with
    a gradient reversal need it: parameters upstream of the reversal follow
    d(loss_c) - d(loss_d), not the derivative of the summed loss.
    """
    for name, p in params.items():
        if p.data.dtype != np.float64:
            raise TypeError(f"gradient checks need 64-bit parameters; {name} is {p.data.dtype}")
        p.grad = None
        p.requires_grad = True
    loss = loss_fn()
    if loss.data.size != 1:
        raise ValueError("loss_fn must return a scalar tensor")
    loss.backward()

    rng = np.random.default_rng(seed)
    report = GradReport(tolerance=tolerance)
    for name, p in params.items():
        analytic = np.zeros(p.data.size) if p.grad is None else p.grad.reshape(-1)
        idx = np.arange(p.data.size)
        if max_entries is not None and p.data.size > max_entries:
            idx = np.sort(rng.choice(p.data.size, max_entries, replace=False))
        fn = (reference or {}).get(name, loss_fn)
        numeric = numeric_gradient(fn, p, epsilon, idx)
        report.errors[name] = relative_error(analytic[idx], numeric)
    return report
