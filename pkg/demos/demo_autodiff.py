"""
Reverse-mode gradients on numpy arrays
======================================

Every layer in the network is built from a small tape-based Tensor. This
walk-through differentiates a toy expression, checks it against finite
differences, then shows what the gradient reversal layer does to a
gradient on its way back.
"""
import numpy as np

from stfnet.engine import Tensor, check_gradients, conv1d, grl, tanh

rng = np.random.default_rng(0)

# A tiny expression: y = sum(tanh(W x) * x)
x = Tensor(rng.normal(size=(3, 1)), requires_grad=True)
W = Tensor(rng.normal(size=(3, 3)), requires_grad=True)
y = (tanh(W @ x) * x).sum()
y.backward()
print("y =", float(y.data))
print("dy/dx =", x.grad.ravel())

# Finite differences agree to roughly 1e-10 in float64.
params = {"x": x, "W": W}
report = check_gradients(lambda: (tanh(params["W"] @ params["x"]) * params["x"]).sum(), params)
print("relative errors:", {k: f"{v:.1e}" for k, v in report.errors.items()})

# A depthwise convolution keeps each input channel separate: zeroing
# channel 1 leaves channel 0 of the output untouched.
signal = rng.normal(size=(1, 2, 20))
kernel = rng.normal(size=(2, 1, 5))
out = conv1d(Tensor(signal), Tensor(kernel), groups=2).data
signal[0, 1] = 0.0
again = conv1d(Tensor(signal), Tensor(kernel), groups=2).data
print("channel 0 unchanged after editing channel 1:", np.array_equal(out[0, 0], again[0, 0]))

# The reversal layer is the identity going forward and flips the sign
# (scaled by its coefficient) coming back.
z = Tensor(np.array([1.0, -2.0]), requires_grad=True)
(grl(z, coefficient=0.5) * 3.0).sum().backward()
print("forward value kept, gradient reversed:", z.grad)  # [-1.5, -1.5]
