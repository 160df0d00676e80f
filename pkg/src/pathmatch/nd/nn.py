"""MLP building block and Gaussian parameter initialization."""

from __future__ import annotations

from typing import Sequence, Union

import numpy as np

from . import tensor as T
from .tensor import Tensor

_ACTS = ("relu", "linear", "sigmoid")


def _as_rng(seed: Union[int, np.random.Generator]) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def gaussian_init(shape, seed: Union[int, np.random.Generator], std: float = 0.01) -> Tensor:
    """A trainable tensor of i.i.d. N(0, std^2) draws from a seeded stream."""
    shape = tuple(int(s) for s in shape)
    if any(s <= 0 for s in shape):
        raise ValueError(f"non-positive dimension in shape {shape}")
    rng = _as_rng(seed)
    return T.parameter(rng.normal(0.0, std, size=shape))


class Mlp:
    """Dense layers x @ W + b with a per-layer activation.

    sizes chains input through hidden to output widths; acts names one
    activation per layer from {"relu", "linear", "sigmoid"}.
    """

    def __init__(
        self,
        sizes: Sequence[int],
        acts: Sequence[str],
        rng: Union[int, np.random.Generator],
        std: float = 0.01,
    ):
        if len(sizes) < 2 or len(acts) != len(sizes) - 1:
            raise ValueError("sizes/acts lengths do not chain")
        for a in acts:
            if a not in _ACTS:
                raise ValueError(f"unknown activation {a!r}")
        rng = _as_rng(rng)
        self.sizes = tuple(int(s) for s in sizes)
        self.acts = tuple(acts)
        self.weights = [
            gaussian_init((self.sizes[i], self.sizes[i + 1]), rng, std)
            for i in range(len(self.sizes) - 1)
        ]
        # Biases start at zero so initial outputs are near-centered.
        self.biases = [T.parameter(np.zeros(self.sizes[i + 1])) for i in range(len(self.sizes) - 1)]

    def forward(self, x: Tensor) -> Tensor:
        squeeze = x.data.ndim == 1
        if squeeze:
            x = T.reshape(x, (1, x.data.shape[0]))
        if x.data.shape[1] != self.sizes[0]:
            raise ValueError(f"input width {x.data.shape[1]} != layer width {self.sizes[0]}")
        for w, b, act in zip(self.weights, self.biases, self.acts):
            x = T.add_bias(T.matmul(x, w), b)
            if act == "relu":
                x = T.relu(x)
            elif act == "sigmoid":
                x = T.sigmoid(x)
        if squeeze:
            x = T.reshape(x, (x.data.shape[1],))
        return x

    def named_params(self, prefix: str) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"{prefix}.w{i}"] = w
            out[f"{prefix}.b{i}"] = b
        return out


def mlp_forward(params: Mlp, x: Tensor) -> Tensor:
    """Forward pass through an Mlp; accepts a 1-D vector or a 2-D batch."""
    return params.forward(x)
