"""Reverse-mode autodiff over float64 numpy buffers.

A Tensor wraps an ndarray plus an optional gradient buffer; ops record a
tape (parents + vector-Jacobian closure). The engine is deliberately small:
it covers exactly what the recurrent pipeline, its heads and its losses
need. Sequence recurrences are single tape nodes backed by the compiled
kernels (see ball3d.nn.kernels), so the tape stays short.
"""

from __future__ import annotations

import numpy as np

from ..errors import GraphNotRecorded, ShapeMismatch


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._vjp = None

    # -- tape -------------------------------------------------------------

    def backward(self):
        """Reverse-mode sweep from a scalar loss; accumulates into .grad of
        every reachable tensor with requires_grad."""
        if self.data.size != 1:
            raise ShapeMismatch("backward() requires a scalar tensor")
        if self._vjp is None and not self._parents:
            raise GraphNotRecorded("no computation graph recorded for this tensor")
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._vjp is None or node.grad is None:
                continue
            grads = node._vjp(node.grad)
            for parent, g in zip(node._parents, grads):
                if g is None or not parent.requires_grad:
                    continue
                g = _sum_to_shape(np.asarray(g, dtype=np.float64), parent.data.shape)
                if parent.grad is None:
                    parent.grad = g.copy()
                else:
                    parent.grad += g

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    # -- conveniences -------------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

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

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def _sum_to_shape(g, shape):
    """Undo numpy broadcasting: reduce gradient g back to `shape`."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, (gs, s) in enumerate(zip(g.shape, shape)):
        if s == 1 and gs != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def from_op(data, parents, vjp) -> Tensor:
    """Build a tape node from a custom forward result.

    `vjp(grad_out)` must return one gradient (or None) per parent. The node
    is recorded only if some parent requires grad."""
    parents = tuple(as_tensor(p) for p in parents)
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._vjp = vjp
    return out


# -- arithmetic --------------------------------------------------------------


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return from_op(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return from_op(a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return from_op(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data))


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data
    return from_op(out, (a, b), lambda g: (g / b.data, -g * out / b.data))


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeMismatch(f"matmul {a.data.shape} @ {b.data.shape}")
    return from_op(
        a.data @ b.data,
        (a, b),
        lambda g: (g @ b.data.T, a.data.T @ g),
    )


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def vjp(g):
        return tuple(
            np.take(g, range(offsets[i], offsets[i + 1]), axis=axis)
            for i in range(len(tensors))
        )

    return from_op(np.concatenate([t.data for t in tensors], axis=axis), tensors, vjp)


def rows(t, start, stop):
    t = as_tensor(t)
    n = t.data.shape[0]

    def vjp(g):
        full = np.zeros_like(t.data)
        full[start:stop] = g
        return (full,)

    out = t.data[start:stop]
    if stop is not None and stop > n:
        raise ShapeMismatch(f"row slice [{start}:{stop}] out of range for {n}")
    return from_op(out.copy(), (t,), vjp)


def flip0(t):
    t = as_tensor(t)
    return from_op(t.data[::-1].copy(), (t,), lambda g: (g[::-1],))


def reshape(t, shape):
    t = as_tensor(t)
    return from_op(t.data.reshape(shape), (t,), lambda g: (g.reshape(t.data.shape),))


def tsum(t):
    t = as_tensor(t)
    return from_op(np.array(t.data.sum()), (t,), lambda g: (np.full_like(t.data, float(g)),))


def tmean(t):
    t = as_tensor(t)
    n = t.data.size
    return from_op(
        np.array(t.data.mean()), (t,), lambda g: (np.full_like(t.data, float(g) / n),)
    )


# -- nonlinearities -----------------------------------------------------------


def log(t):
    t = as_tensor(t)
    return from_op(np.log(t.data), (t,), lambda g: (g / t.data,))


def sigmoid(t):
    t = as_tensor(t)
    s = 1.0 / (1.0 + np.exp(-t.data))
    return from_op(s, (t,), lambda g: (g * s * (1.0 - s),))


def tanh(t):
    t = as_tensor(t)
    y = np.tanh(t.data)
    return from_op(y, (t,), lambda g: (g * (1.0 - y * y),))


def leaky_relu(t, slope=0.01):
    t = as_tensor(t)
    pos = t.data > 0
    out = np.where(pos, t.data, slope * t.data)
    return from_op(out, (t,), lambda g: (g * np.where(pos, 1.0, slope),))


def clip(t, lo, hi):
    """Clamp values; gradient is zero on the clamped set."""
    t = as_tensor(t)
    inside = (t.data > lo) & (t.data < hi)
    return from_op(np.clip(t.data, lo, hi), (t,), lambda g: (g * inside,))
