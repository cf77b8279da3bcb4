"""Minimal reverse-mode autodiff over numpy arrays.

A ``Tensor`` wraps an ndarray plus an optional backward closure; ``backward``
walks the recorded graph in reverse topological order. Only the operations
needed by the scoping models are provided. All ops preserve the dtype of
their inputs (float32 for training, float64 for gradient verification) and
are deterministic.
"""

from __future__ import annotations

import numpy as np

BCE_EPS = 1e-7


class ShapeMismatch(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


class EmptySequence(ValueError):
    pass


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self._parents = _parents if self.requires_grad else ()
        self._backward = _backward if self.requires_grad else None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def item(self) -> float:
        return float(self.data)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum gradient over axes that were broadcast in the forward op."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def constant(data, dtype=None) -> Tensor:
    arr = np.asarray(data, dtype=dtype)
    return Tensor(arr)


def parameter(data, dtype=np.float32) -> Tensor:
    return Tensor(np.asarray(data, dtype=dtype), requires_grad=True)


def add(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data + b.data

    def bw(out):
        if a.requires_grad:
            a._accumulate(_unbroadcast(out.grad, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(out.grad, b.data.shape))

    return Tensor(out_data, _parents=(a, b), _backward=bw)


def add_n(*ts: Tensor) -> Tensor:
    out_data = ts[0].data.copy()
    for t in ts[1:]:
        out_data = out_data + t.data

    def bw(out):
        for t in ts:
            if t.requires_grad:
                t._accumulate(_unbroadcast(out.grad, t.data.shape))

    return Tensor(out_data, _parents=ts, _backward=bw)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data - b.data

    def bw(out):
        if a.requires_grad:
            a._accumulate(_unbroadcast(out.grad, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-out.grad, b.data.shape))

    return Tensor(out_data, _parents=(a, b), _backward=bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data * b.data

    def bw(out):
        if a.requires_grad:
            a._accumulate(_unbroadcast(out.grad * b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(out.grad * a.data, b.data.shape))

    return Tensor(out_data, _parents=(a, b), _backward=bw)


def scale(a: Tensor, c: float) -> Tensor:
    def bw(out):
        if a.requires_grad:
            a._accumulate(out.grad * c)

    return Tensor(a.data * c, _parents=(a,), _backward=bw)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeMismatch(f"matmul: {a.data.shape} @ {b.data.shape}")
    out_data = a.data @ b.data

    def bw(out):
        if a.requires_grad:
            a._accumulate(out.grad @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ out.grad)

    return Tensor(out_data, _parents=(a, b), _backward=bw)


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Affine map ``x @ w.T + b`` with ``w`` stored (out, in)."""
    if x.data.shape[-1] != w.data.shape[1]:
        raise ShapeMismatch(f"linear: x {x.data.shape}, w {w.data.shape}")
    out_data = x.data @ w.data.T + b.data

    def bw(out):
        if x.requires_grad:
            x._accumulate(out.grad @ w.data)
        if w.requires_grad:
            w._accumulate(out.grad.T @ x.data)
        if b.requires_grad:
            b._accumulate(out.grad.sum(axis=0))

    return Tensor(out_data, _parents=(x, w, b), _backward=bw)


def sigmoid(a: Tensor) -> Tensor:
    out_data = 1.0 / (1.0 + np.exp(-a.data))

    def bw(out):
        if a.requires_grad:
            a._accumulate(out.grad * out.data * (1.0 - out.data))

    return Tensor(out_data, _parents=(a,), _backward=bw)


def tanh(a: Tensor) -> Tensor:
    out_data = np.tanh(a.data)

    def bw(out):
        if a.requires_grad:
            a._accumulate(out.grad * (1.0 - out.data * out.data))

    return Tensor(out_data, _parents=(a,), _backward=bw)


def log(a: Tensor) -> Tensor:
    def bw(out):
        if a.requires_grad:
            a._accumulate(out.grad / a.data)

    return Tensor(np.log(a.data), _parents=(a,), _backward=bw)


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    out_data = np.clip(a.data, lo, hi)

    def bw(out):
        if a.requires_grad:
            inside = ((a.data >= lo) & (a.data <= hi)).astype(a.data.dtype)
            a._accumulate(out.grad * inside)

    return Tensor(out_data, _parents=(a,), _backward=bw)


def concat(ts, axis: int) -> Tensor:
    out_data = np.concatenate([t.data for t in ts], axis=axis)
    sizes = [t.data.shape[axis] for t in ts]

    def bw(out):
        offset = 0
        for t, size in zip(ts, sizes):
            if t.requires_grad:
                sl = [slice(None)] * out.grad.ndim
                sl[axis] = slice(offset, offset + size)
                t._accumulate(out.grad[tuple(sl)])
            offset += size

    return Tensor(out_data, _parents=tuple(ts), _backward=bw)


def rows(a: Tensor, start: int, stop: int) -> Tensor:
    def bw(out):
        if a.requires_grad:
            g = np.zeros_like(a.data)
            g[start:stop] = out.grad
            a._accumulate(g)

    return Tensor(a.data[start:stop], _parents=(a,), _backward=bw)


def gather_rows(table: Tensor, idx: np.ndarray) -> Tensor:
    idx = np.asarray(idx, dtype=np.int64)

    def bw(out):
        if table.requires_grad:
            if table.grad is None:
                table.grad = np.zeros_like(table.data)
            np.add.at(table.grad, idx, out.grad)

    return Tensor(table.data[idx], _parents=(table,), _backward=bw)


def mask_lerp(cand: Tensor, prev: Tensor, mask: np.ndarray) -> Tensor:
    """``mask * cand + (1 - mask) * prev`` with a constant 0/1 mask."""
    inv = 1.0 - mask
    out_data = mask * cand.data + inv * prev.data

    def bw(out):
        if cand.requires_grad:
            cand._accumulate(out.grad * mask)
        if prev.requires_grad:
            prev._accumulate(out.grad * inv)

    return Tensor(out_data, _parents=(cand, prev), _backward=bw)


def sum_all(a: Tensor) -> Tensor:
    def bw(out):
        if a.requires_grad:
            a._accumulate(np.full_like(a.data, float(out.grad)))

    return Tensor(a.data.sum(), _parents=(a,), _backward=bw)


def bce_loss(p, y) -> Tensor:
    """Binary cross entropy summed over sentences.

    ``-sum(y*log(p) + (1-y)*log(1-p))`` with probabilities clamped to
    ``[BCE_EPS, 1 - BCE_EPS]``. Gradient is zero where the clamp is active.
    """
    if not isinstance(p, Tensor):
        p = Tensor(np.asarray(p, dtype=np.float64))
    y = np.asarray(y, dtype=p.data.dtype)
    if y.size != p.data.size:
        raise LengthMismatch(f"{p.data.size} probabilities vs {y.size} labels")
    y = y.reshape(p.data.shape)
    eps = BCE_EPS
    pc = np.clip(p.data, eps, 1.0 - eps)
    out_data = -(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)).sum()

    def bw(out):
        if p.requires_grad:
            inside = ((p.data >= eps) & (p.data <= 1.0 - eps)).astype(p.data.dtype)
            dp = (-(y / pc) + (1.0 - y) / (1.0 - pc)) * inside
            p._accumulate(dp * float(out.grad))

    return Tensor(out_data, _parents=(p,), _backward=bw)


def backward(loss: Tensor) -> None:
    """Populate ``.grad`` on every reachable tensor that requires grad."""
    if loss.data.size != 1:
        raise ShapeMismatch("backward expects a scalar loss")
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited and parent.requires_grad:
                stack.append((parent, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node)


def zero_grads(tensors) -> None:
    for t in tensors:
        t.grad = None
