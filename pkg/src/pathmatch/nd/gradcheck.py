"""Finite-difference gradient checking for scalar-valued graphs."""

from __future__ import annotations

import math
from typing import Callable, Mapping

import numpy as np

from .tensor import Tensor


def grad_check(
    f: Callable[[], Tensor],
    params: Mapping[str, Tensor],
    eps: float = 1e-5,
) -> float:
    """Max relative error between reverse-mode and central-difference grads.

    f rebuilds the scalar loss from the current parameter values, so any
    randomness (masks, shuffles) must be frozen outside the closure.
    Relative error per coordinate is |a - n| / max(|a|, |n|, 1e-8).
    """
    for t in params.values():
        t.grad = None
    out = f()
    if not math.isfinite(float(out.data)):
        raise ValueError("non-finite loss")
    out.backward()
    analytic = {
        name: (np.zeros_like(t.data) if t.grad is None else t.grad.copy())
        for name, t in params.items()
    }

    worst = 0.0
    for name, t in params.items():
        flat = t.data.reshape(-1)
        a_flat = analytic[name].reshape(-1)
        for i in range(flat.shape[0]):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = float(f().data)
            flat[i] = orig - eps
            f_minus = float(f().data)
            flat[i] = orig
            if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
                raise ValueError(f"non-finite loss at perturbed {name}[{i}]")
            numeric = (f_plus - f_minus) / (2.0 * eps)
            a = a_flat[i]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            if rel > worst:
                worst = rel
    return worst
