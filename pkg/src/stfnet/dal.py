"""Domain adversarial learner: per-window domain head behind a gradient reversal, and the losses."""
from __future__ import annotations

import numpy as np

from .engine import RunningStats, Tensor, dense, grl, log, mul, normalize, relu, softmax
from .tes import init_head

LOG_FLOOR = 1e-12


def init_domain_head(rng, in_dim, hidden=128, domains=2, dtype=np.float32):
    params = init_head(rng, in_dim, hidden, domains, dtype, prefix="dom")
    params["dom.bn_scale"] = np.ones(hidden, dtype=dtype)
    params["dom.bn_shift"] = np.zeros(hidden, dtype=dtype)
    return params, {"dom.bn": RunningStats(hidden, dtype=dtype)}


def domain_classify(f_dom, params, state=None, training=False):
    """f_dom: [B, T, V, F] -> per-window domain probabilities [B, T, 2].

    Flatten V*F -> dense 128 -> relu -> batchnorm -> dense 2 -> softmax,
    applied independently to every (subject, window).
    """
    b, t = f_dom.shape[:2]
    x = f_dom.reshape(b * t, -1)
    h = relu(dense(x, params["dom.w1"], params["dom.b1"]))
    running = None if state is None else state.get("dom.bn")
    h = normalize(h, "batch", params["dom.bn_scale"], params["dom.bn_shift"],
                  training=training, running=running, channel_axis=-1)
    return softmax(dense(h, params["dom.w2"], params["dom.b2"]), axis=-1).reshape(b, t, -1)


def adversarial_branch(f_dom, params, state=None, training=False, coefficient=1.0):
    """Gradient reversal followed by the domain head."""
    return domain_classify(grl(f_dom, coefficient), params, state, training)


def _one_hot(labels, classes, dtype):
    labels = np.asarray(labels, dtype=int)
    return np.eye(classes, dtype=dtype)[labels]


def cross_entropy(probs, targets_onehot, count):
    """-(1/count) * sum(y * log(max(p, 1e-12)))."""
    return mul(mul(Tensor(targets_onehot), log(probs, LOG_FLOOR)).sum(), -1.0 / count)


def class_loss(probs, labels):
    """Mean cross-entropy over the source subjects of a batch. probs: [S, G]."""
    s = probs.shape[0]
    if s == 0:
        raise ValueError("class loss needs at least one source-domain subject")
    return cross_entropy(probs, _one_hot(labels, probs.shape[-1], probs.dtype), s)


def domain_loss(probs, domain_labels):
    """Cross-entropy over every (subject, window) of both domains. probs: [L, T, R].

    ``domain_labels`` is per subject ([L]) or per window ([L, T]).
    """
    n, t, r = probs.shape
    labels = np.asarray(domain_labels, dtype=int)
    if labels.ndim == 1:
        labels = np.repeat(labels[:, None], t, axis=1)
    return cross_entropy(probs, _one_hot(labels, r, probs.dtype), n * t)
