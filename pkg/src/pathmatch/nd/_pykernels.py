"""Numpy implementations of the hot kernels.

Fallback for :mod:`pathmatch.nd._ckernels`; both modules expose the same
functions with identical semantics, so either can back the tensor ops.
All arrays are float64.
"""

import numpy as np


def relu_fwd(x):
    return np.maximum(x, 0.0)


def relu_bwd(grad, out):
    return np.where(out > 0.0, grad, 0.0)


def sigmoid_fwd(x):
    # Split by sign to avoid overflow in exp.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_bwd(grad, out):
    return grad * out * (1.0 - out)


def softmax_rows_fwd(x):
    shifted = x - x.max(axis=1, keepdims=True)
    ex = np.exp(shifted)
    return ex / ex.sum(axis=1, keepdims=True)


def softmax_rows_bwd(grad, out):
    dot = (grad * out).sum(axis=1, keepdims=True)
    return out * (grad - dot)


def scatter_add_rows(acc, idx, src):
    """acc[idx[i], :] += src[i, :] with repeated indices accumulated."""
    np.add.at(acc, idx, src)


def adam_update(param, grad, m, v, lr, beta1, beta2, eps, step):
    """One fused in-place Adam update with bias correction."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    mhat = m / (1.0 - beta1**step)
    vhat = v / (1.0 - beta2**step)
    param -= lr * mhat / (np.sqrt(vhat) + eps)
