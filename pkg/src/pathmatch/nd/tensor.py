"""Minimal reverse-mode autodiff over dense float64 arrays.

Values are numpy arrays wrapped in Tensor nodes; each op records a closure
that routes the output gradient back to its inputs.  Only the shapes the
model needs are supported: 1-D vectors, 2-D matrices, and 0-D scalars.
There is no general broadcasting; ops with mixed shapes (add_bias,
scale_rows) spell out the pairing they implement.

Backward closures receive the output gradient as an argument and must not
capture the output node itself: a closure that referenced its own Tensor
would form a reference cycle, and freeing graphs would then wait on the
garbage collector instead of plain refcounting.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels


class Tensor:
    """A node in the compute graph.

    data is always a C-contiguous float64 array.  grad is allocated lazily
    and accumulated into; selection indices are plain numpy integer arrays
    and never differentiated.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        parents: Sequence["Tensor"] = (),
        backward: Optional[Callable[[np.ndarray], None]] = None,
    ):
        arr = np.asarray(data, dtype=np.float64)
        # ascontiguousarray would promote 0-d scalars to 1-d; keep them 0-d.
        if arr.ndim and not arr.flags["C_CONTIGUOUS"]:
            arr = np.ascontiguousarray(arr)
        self.data = arr
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents = tuple(parents)
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Reverse-mode sweep from a scalar output."""
        if self.data.shape != ():
            raise ValueError("backward() requires a scalar output")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        # Iterative post-order: children of a node enter topo before the node.
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def _needs(*tensors: Tensor) -> bool:
    return any(t.requires_grad for t in tensors)


def _ensure_grad(t: Tensor) -> np.ndarray:
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    return t.grad


def _accum(t: Tensor, g: np.ndarray) -> None:
    if t.requires_grad:
        _ensure_grad(t)
        t.grad += g


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


# ---------------------------------------------------------------------------
# elementwise and affine ops
# ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ValueError(f"add shape mismatch: {a.data.shape} vs {b.data.shape}")

    def _bwd(g):
        _accum(a, g)
        _accum(b, g)

    return Tensor(a.data + b.data, _needs(a, b), (a, b), _bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ValueError(f"sub shape mismatch: {a.data.shape} vs {b.data.shape}")

    def _bwd(g):
        _accum(a, g)
        _accum(b, -g)

    return Tensor(a.data - b.data, _needs(a, b), (a, b), _bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Hadamard product of same-shape tensors."""
    if a.data.shape != b.data.shape:
        raise ValueError(f"mul shape mismatch: {a.data.shape} vs {b.data.shape}")

    def _bwd(g):
        _accum(a, g * b.data)
        _accum(b, g * a.data)

    return Tensor(a.data * b.data, _needs(a, b), (a, b), _bwd)


def mul_scalar(x: Tensor, c: float) -> Tensor:
    def _bwd(g):
        _accum(x, g * c)

    return Tensor(x.data * c, x.requires_grad, (x,), _bwd)


def add_n(xs: Sequence[Tensor]) -> Tensor:
    """Sum of same-shape tensors."""
    if not xs:
        raise ValueError("add_n of empty sequence")
    xs = tuple(xs)
    acc = xs[0].data.copy()
    for x in xs[1:]:
        if x.data.shape != acc.shape:
            raise ValueError("add_n shape mismatch")
        acc += x.data

    def _bwd(g):
        for x in xs:
            _accum(x, g)

    return Tensor(acc, _needs(*xs), xs, _bwd)


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    """x (n, m) plus a bias row b (m,)."""
    if x.data.ndim != 2 or b.data.shape != (x.data.shape[1],):
        raise ValueError(f"add_bias shape mismatch: {x.data.shape} vs {b.data.shape}")

    def _bwd(g):
        _accum(x, g)
        _accum(b, g.sum(axis=0))

    return Tensor(x.data + b.data[None, :], _needs(x, b), (x, b), _bwd)


def scale_rows(x: Tensor, s: Tensor) -> Tensor:
    """Row i of x (n, m) scaled by scalar s[i] (n,)."""
    if x.data.ndim != 2 or s.data.shape != (x.data.shape[0],):
        raise ValueError(f"scale_rows shape mismatch: {x.data.shape} vs {s.data.shape}")

    def _bwd(g):
        _accum(x, g * s.data[:, None])
        _accum(s, (g * x.data).sum(axis=1))

    return Tensor(x.data * s.data[:, None], _needs(x, s), (x, s), _bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape[-1] != b.data.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")

    def _bwd(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return Tensor(a.data @ b.data, _needs(a, b), (a, b), _bwd)


def matmul_nt(a: Tensor, b: Tensor) -> Tensor:
    """a (n, d) @ b (m, d).T without materializing the transpose node."""
    if a.data.shape[1] != b.data.shape[1]:
        raise ValueError(f"matmul_nt shape mismatch: {a.data.shape} vs {b.data.shape}")

    def _bwd(g):
        _accum(a, g @ b.data)
        _accum(b, g.T @ a.data)

    return Tensor(a.data @ b.data.T, _needs(a, b), (a, b), _bwd)


# ---------------------------------------------------------------------------
# nonlinearities
# ---------------------------------------------------------------------------


def relu(x: Tensor) -> Tensor:
    y = kernels.relu_fwd(x.data)

    def _bwd(g):
        _accum(x, kernels.relu_bwd(g, y))

    return Tensor(y, x.requires_grad, (x,), _bwd)


def sigmoid(x: Tensor) -> Tensor:
    y = kernels.sigmoid_fwd(x.data)

    def _bwd(g):
        _accum(x, kernels.sigmoid_bwd(g, y))

    return Tensor(y, x.requires_grad, (x,), _bwd)


def softmax_rows(x: Tensor) -> Tensor:
    """Row-wise softmax of a 2-D tensor, max-subtracted for stability."""
    if x.data.ndim != 2:
        raise ValueError("softmax_rows expects a 2-D tensor")
    y = kernels.softmax_rows_fwd(x.data)

    def _bwd(g):
        _accum(x, kernels.softmax_rows_bwd(g, y))

    return Tensor(y, x.requires_grad, (x,), _bwd)


def softmax(v: Tensor) -> Tensor:
    """Softmax of a 1-D tensor."""
    if v.data.ndim != 1:
        raise ValueError("softmax expects a 1-D tensor")
    if v.data.shape[0] == 0:
        raise ValueError("softmax of empty input")
    return reshape(softmax_rows(reshape(v, (1, v.data.shape[0]))), (v.data.shape[0],))


def l1_normalize_rows(x: Tensor) -> Tensor:
    """Divide each row by its sum.  Rows must have positive sums."""
    if x.data.ndim != 2:
        raise ValueError("l1_normalize_rows expects a 2-D tensor")
    s = np.maximum(x.data.sum(axis=1, keepdims=True), 1e-300)

    def _bwd(g):
        dot = (g * x.data).sum(axis=1, keepdims=True)
        _accum(x, g / s - dot / (s * s))

    return Tensor(x.data / s, x.requires_grad, (x,), _bwd)


def l2_normalize_rows(x: Tensor, eps: float = 1e-12) -> Tensor:
    """Scale each row to unit Euclidean norm (plus eps in the denominator)."""
    if x.data.ndim != 2:
        raise ValueError("l2_normalize_rows expects a 2-D tensor")
    norm = np.sqrt((x.data * x.data).sum(axis=1, keepdims=True))
    r = 1.0 / (norm + eps)

    def _bwd(g):
        dot = (g * x.data).sum(axis=1, keepdims=True)
        _accum(x, g * r - x.data * dot * r * r / np.maximum(norm, 1e-12))

    return Tensor(x.data * r, x.requires_grad, (x,), _bwd)


# ---------------------------------------------------------------------------
# shape and gather ops
# ---------------------------------------------------------------------------


def reshape(x: Tensor, shape) -> Tensor:
    def _bwd(g):
        _accum(x, g.reshape(x.data.shape))

    return Tensor(x.data.reshape(shape), x.requires_grad, (x,), _bwd)


def concat_cols(xs: Sequence[Tensor]) -> Tensor:
    """Concatenate 2-D tensors with equal row counts along columns."""
    if not xs:
        raise ValueError("concat_cols of empty sequence")
    xs = tuple(xs)
    widths = [x.data.shape[1] for x in xs]

    def _bwd(g):
        off = 0
        for x, w in zip(xs, widths):
            _accum(x, g[:, off : off + w])
            off += w

    return Tensor(np.concatenate([x.data for x in xs], axis=1), _needs(*xs), xs, _bwd)


def repeat_rows(x: Tensor, k: int) -> Tensor:
    """Each row of x (n, m) repeated k times -> (n*k, m)."""
    if x.data.ndim != 2:
        raise ValueError("repeat_rows expects a 2-D tensor")

    def _bwd(g):
        n, m = x.data.shape
        _accum(x, g.reshape(n, k, m).sum(axis=1))

    return Tensor(np.repeat(x.data, k, axis=0), x.requires_grad, (x,), _bwd)


def block_sum_rows(x: Tensor, block: int) -> Tensor:
    """Sum consecutive blocks of rows: (n*block, m) -> (n, m)."""
    if x.data.ndim != 2 or x.data.shape[0] % block != 0:
        raise ValueError("block_sum_rows shape mismatch")
    n = x.data.shape[0] // block

    def _bwd(g):
        _accum(x, np.repeat(g, block, axis=0))

    return Tensor(x.data.reshape(n, block, -1).sum(axis=1), x.requires_grad, (x,), _bwd)


def gather_rows(x: Tensor, idx) -> Tensor:
    """Select rows of x (V, m) by an integer index array; repeats allowed."""
    idx = np.asarray(idx, dtype=np.int64)

    def _bwd(g):
        if x.requires_grad:
            kernels.scatter_add_rows(_ensure_grad(x), idx, g)

    return Tensor(x.data[idx], x.requires_grad, (x,), _bwd)


def scatter_rows(src: Tensor, idx, n_rows: int) -> Tensor:
    """Place rows of src at positions idx in a zero (n_rows, m) tensor.

    idx must contain distinct positions; duplicates would silently drop rows.
    """
    idx = np.asarray(idx, dtype=np.int64)
    data = np.zeros((n_rows, src.data.shape[1]))
    data[idx] = src.data

    def _bwd(g):
        _accum(src, g[idx])

    return Tensor(data, src.requires_grad, (src,), _bwd)


def take_elems(x: Tensor, rows, cols) -> Tensor:
    """Pick scalar entries x[rows[i], cols[i]] into a vector."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)

    def _bwd(g):
        if x.requires_grad:
            np.add.at(_ensure_grad(x), (rows, cols), g)

    return Tensor(x.data[rows, cols], x.requires_grad, (x,), _bwd)


# ---------------------------------------------------------------------------
# reductions and losses
# ---------------------------------------------------------------------------


def sum_all(x: Tensor) -> Tensor:
    def _bwd(g):
        _accum(x, np.full_like(x.data, float(g)))

    return Tensor(x.data.sum(), x.requires_grad, (x,), _bwd)


def mean_all(x: Tensor) -> Tensor:
    n = x.data.size

    def _bwd(g):
        _accum(x, np.full_like(x.data, float(g) / n))

    return Tensor(x.data.mean(), x.requires_grad, (x,), _bwd)


def softmax_xent_rows(logits: Tensor, targets) -> Tensor:
    """Mean cross-entropy of row-wise softmax against integer targets."""
    targets = np.asarray(targets, dtype=np.int64)
    n = logits.data.shape[0]
    probs = kernels.softmax_rows_fwd(logits.data)
    picked = probs[np.arange(n), targets]

    def _bwd(g):
        gl = probs.copy()
        gl[np.arange(n), targets] -= 1.0
        _accum(logits, gl * (float(g) / n))

    return Tensor(-np.log(picked).mean(), logits.requires_grad, (logits,), _bwd)


def bce_mean(p: Tensor, y, eps: float = 1e-12) -> Tensor:
    """Mean binary cross-entropy of probabilities p (n,) against labels y.

    Probabilities are clamped to [eps, 1-eps]; clamped coordinates get zero
    gradient, matching the piecewise-constant clamp exactly.
    """
    y = np.asarray(y, dtype=np.float64)
    if p.data.shape != y.shape:
        raise ValueError("bce_mean shape mismatch")
    n = p.data.shape[0]
    pc = np.clip(p.data, eps, 1.0 - eps)
    loss = -(y * np.log(pc) + (1.0 - y) * np.log1p(-pc)).mean()

    def _bwd(g):
        inside = (p.data > eps) & (p.data < 1.0 - eps)
        base = (pc - y) / (pc * (1.0 - pc) * n)
        _accum(p, np.where(inside, base, 0.0) * float(g))

    return Tensor(loss, p.requires_grad, (p,), _bwd)


# ---------------------------------------------------------------------------
# selection (not differentiated)
# ---------------------------------------------------------------------------


def topk_select(scores, k: int) -> np.ndarray:
    """Indices of the k largest scores, ties broken by smaller index,
    returned sorted by original index ascending."""
    s = scores.data if isinstance(scores, Tensor) else np.asarray(scores)
    if s.ndim != 1:
        raise ValueError("topk_select expects a 1-D score vector")
    if not 1 <= k <= s.shape[0]:
        raise ValueError(f"k={k} out of range for {s.shape[0]} scores")
    # Stable sort on negated scores keeps smaller indices first among ties.
    order = np.argsort(-s, kind="stable")[:k]
    return np.sort(order)


def topk_rows(scores: np.ndarray, k: int) -> np.ndarray:
    """Row-wise topk_select over a 2-D score array -> (n, k) index array."""
    if scores.ndim != 2:
        raise ValueError("topk_rows expects a 2-D score array")
    if not 1 <= k <= scores.shape[1]:
        raise ValueError(f"k={k} out of range for {scores.shape[1]} scores")
    order = np.argsort(-scores, axis=1, kind="stable")[:, :k]
    return np.sort(order, axis=1)
