"""Numpy reference kernels.

These are the pure-Python implementations of the fused hot-path kernels.
`dams.engine.backend` picks either this module or the compiled
`_ckernels` extension at import time; both expose the same signatures and
operate on contiguous float32/float64 arrays.

All kernels are deterministic and single-threaded apart from whatever BLAS
numpy itself dispatches to.
"""

import numpy as np


def layernorm_fwd(x, gain, bias, eps):
    """Normalize rows of x (N, D). Returns (y, mean, rstd)."""
    mean = x.mean(axis=1)
    var = x.var(axis=1)
    rstd = 1.0 / np.sqrt(var + eps)
    y = (x - mean[:, None]) * rstd[:, None] * gain + bias
    return y, mean, rstd


def layernorm_bwd(g, x, gain, mean, rstd):
    """Backward of layernorm_fwd. Returns (dx, dgain, dbias)."""
    xhat = (x - mean[:, None]) * rstd[:, None]
    dbias = g.sum(axis=0)
    dgain = (g * xhat).sum(axis=0)
    gx = g * gain
    m1 = gx.mean(axis=1)
    m2 = (gx * xhat).mean(axis=1)
    dx = (gx - m1[:, None] - xhat * m2[:, None]) * rstd[:, None]
    return dx, dgain, dbias


def softmax_fwd(x):
    """Row softmax of x (N, D), numerically stabilized."""
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_bwd(g, y):
    """Backward of softmax_fwd given forward output y."""
    dot = (g * y).sum(axis=1, keepdims=True)
    return y * (g - dot)


def token_nll_fwd(logits, targets):
    """Per-row negative log likelihood of targets under row softmax.

    logits: (N, V); targets: (N,) int64. Returns (nll (N,), probs (N, V)),
    probs cached for the backward pass.
    """
    probs = softmax_fwd(logits)
    n = logits.shape[0]
    picked = probs[np.arange(n), targets]
    nll = -np.log(picked)
    return nll, probs


def token_nll_bwd(g, probs, targets):
    """Backward of token_nll_fwd; g is the (N,) upstream gradient."""
    dlogits = probs * g[:, None]
    n = probs.shape[0]
    dlogits[np.arange(n), targets] -= g
    return dlogits


def adam_update(p, g, m, v, lr, beta1, beta2, eps, bc1, bc2):
    """In-place Adam step on flat arrays. bc1/bc2 are 1-beta^t corrections."""
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * (g * g)
    mhat = m / bc1
    vhat = v / bc2
    p -= lr * mhat / (np.sqrt(vhat) + eps)


def embedding_bwd(dtable, ids, g):
    """Scatter-add rows of g (N, D) into dtable at positions ids (N,)."""
    np.add.at(dtable, ids, g)
