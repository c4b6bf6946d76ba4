"""Dense float64 tensors with reverse-mode automatic differentiation.

Every op returns a new :class:`Tensor` that remembers its parents and a
closure mapping the output gradient to parent gradients. ``backward`` walks
that record in reverse topological order and then drops it, so each
forward pass builds a fresh tape.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np


class ShapeMismatch(ValueError):
    pass


class NotScalarLoss(ValueError):
    pass


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward: Optional[Callable] = None
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def backward(self) -> None:
        backward(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data, parents: Sequence[Tensor], fn: Callable) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = fn
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> tuple:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeMismatch(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


# -- elementwise ------------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "add")

    def fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _result(a.data + b.data, (a, b), fn)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "sub")

    def fn(g):
        return _unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)

    return _result(a.data - b.data, (a, b), fn)


def mul(a, b) -> Tensor:
    """Elementwise product with broadcasting."""
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "mul")

    def fn(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _result(a.data * b.data, (a, b), fn)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _result(a.data * mask, (a,), lambda g: (g * mask,))


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    # split by sign so exp never overflows
    e = np.exp(-np.abs(x))
    s = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return _result(s, (a,), lambda g: (g * s * (1.0 - s),))


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.data)
    return _result(t, (a,), lambda g: (g * (1.0 - t * t),))


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    x = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(x)
    s = e / e.sum(axis=axis, keepdims=True)

    def fn(g):
        return (s * (g - (g * s).sum(axis=axis, keepdims=True)),)

    return _result(s, (a,), fn)


# -- linear algebra and reductions --------------------------------------------------


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul: shapes {a.shape} and {b.shape} are incompatible")

    def fn(g):
        ga = g @ b.data.T if a.requires_grad else None
        gb = a.data.T @ g if b.requires_grad else None
        return ga, gb

    return _result(a.data @ b.data, (a, b), fn)


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise ShapeMismatch("concat: no operands")
    try:
        data = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError:
        raise ShapeMismatch(f"concat: shapes {[t.shape for t in ts]} do not line up") from None
    sizes = np.cumsum([t.shape[axis] for t in ts])[:-1]

    def fn(g):
        return tuple(np.split(g, sizes, axis=axis))

    return _result(data, ts, fn)


def sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    shape = a.shape

    def fn(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape),)

    return _result(a.data.sum(axis=axis, keepdims=keepdims), (a,), fn)


def mean(a: Tensor) -> Tensor:
    n = a.data.size
    shape = a.shape
    return _result(a.data.mean(), (a,), lambda g: (np.full(shape, g / n),))


def inner_product(a, b) -> Tensor:
    """Row-wise dot product: (n, d) x (n, d) -> (n, 1)."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeMismatch(f"inner_product: shapes {a.shape} and {b.shape} differ")
    return sum(mul(a, b), axis=-1, keepdims=True)


# -- indexing -------------------------------------------------------------------------


def gather(a: Tensor, rows) -> Tensor:
    rows = np.asarray(rows, dtype=np.int64)
    shape = a.shape

    def fn(g):
        out = np.zeros(shape)
        np.add.at(out, rows, g)
        return (out,)

    return _result(a.data[rows], (a,), fn)


def scatter_add(base: Tensor, rows, values: Tensor) -> Tensor:
    """``base`` with ``values[k]`` added to row ``rows[k]``."""
    base, values = as_tensor(base), as_tensor(values)
    rows = np.asarray(rows, dtype=np.int64)
    if values.shape[1:] != base.shape[1:] or len(rows) != values.shape[0]:
        raise ShapeMismatch(f"scatter_add: base {base.shape}, values {values.shape}, {len(rows)} rows")
    out = base.data.copy()
    np.add.at(out, rows, values.data)
    return _result(out, (base, values), lambda g: (g, g[rows]))


def segment_sum(a: Tensor, segments, n_segments: int) -> Tensor:
    """Sum rows of ``a`` that share a segment id: (N, d) -> (n_segments, d)."""
    zeros = Tensor(np.zeros((n_segments,) + a.shape[1:]))
    return scatter_add(zeros, segments, a)


# -- losses ---------------------------------------------------------------------------


def bce_with_logits(logits: Tensor, labels) -> Tensor:
    """Mean binary cross-entropy of sigmoid(logits) against 0/1 labels."""
    y = np.asarray(labels, dtype=np.float64).reshape(logits.shape)
    x = logits.data
    loss = np.maximum(x, 0) - x * y + np.log1p(np.exp(-np.abs(x)))
    n = x.size
    e = np.exp(-np.abs(x))
    s = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return _result(loss.mean(), (logits,), lambda g: (g * (s - y) / n,))


# -- reverse pass -----------------------------------------------------------------------


def backward(loss: Tensor) -> None:
    """Populate ``.grad`` of every leaf reachable from a scalar ``loss``."""
    if loss.data.size != 1:
        raise NotScalarLoss(f"loss must be a scalar, got shape {loss.shape}")
    order: list[Tensor] = []
    seen: set[int] = set()
    stack = [(loss, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))

    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node._accumulate(g)
            continue
        for p, pg in zip(node._parents, node._backward(g)):
            if not p.requires_grad:
                continue
            if id(p) in grads:
                grads[id(p)] = grads[id(p)] + pg
            else:
                grads[id(p)] = pg
        # free the tape as we go
        node._parents = ()
        node._backward = None
