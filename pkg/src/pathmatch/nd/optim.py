"""Adam optimizer with bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import kernels
from .tensor import Tensor


@dataclass
class AdamState:
    """Per-parameter moment accumulators and a shared step counter."""

    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(
    state: AdamState,
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    lr: float,
) -> tuple[Mapping[str, np.ndarray], AdamState]:
    """One in-place Adam update over a name-keyed parameter set."""
    state.step += 1
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"grad shape mismatch for {name}: {g.shape} vs {p.shape}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        kernels.adam_update(
            p, g, state.m[name], state.v[name], lr, state.beta1, state.beta2, state.eps, state.step
        )
    return params, state


class Adam:
    """Adam over a dict of named Tensors.  Tensors without grads are skipped
    but still advance with the shared step counter's bias correction."""

    def __init__(
        self,
        params: Mapping[str, Tensor],
        lr: float = 0.001,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = dict(params)
        self.lr = lr
        self.state = AdamState(beta1=beta1, beta2=beta2, eps=eps)
        for name, t in self.params.items():
            self.state.m[name] = np.zeros_like(t.data)
            self.state.v[name] = np.zeros_like(t.data)

    def step(self) -> None:
        self.state.step += 1
        for name, t in self.params.items():
            if t.grad is None:
                continue
            kernels.adam_update(
                t.data,
                t.grad,
                self.state.m[name],
                self.state.v[name],
                self.lr,
                self.state.beta1,
                self.state.beta2,
                self.state.eps,
                self.state.step,
            )

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.grad = None
