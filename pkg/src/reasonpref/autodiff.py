"""Minimal reverse-mode automatic differentiation over numpy arrays.

A ``Tensor`` wraps a float64 ndarray and remembers how it was produced, so
calling ``backward()`` on a scalar result accumulates gradients into every
upstream tensor. Only the handful of operations the reward-learning losses
need are implemented. The module-level helpers (``exp``, ``log``, ...)
dispatch on type, so the same formula code runs on plain arrays when no
gradient is wanted.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    """Array node in the computation graph."""

    __slots__ = ("value", "grad", "_parents", "_backward")

    def __init__(self, value, parents=(), backward=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.value.shape

    # -- graph traversal ----------------------------------------------------

    def backward(self):
        """Backpropagate from this scalar through the graph."""
        if self.value.ndim != 0 and self.value.size != 1:
            raise ValueError("backward() requires a scalar tensor")
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
                stack.append((p, False))
        self.grad = np.ones_like(self.value)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        self.grad += g

    # -- operators ------------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        return mul(self, power(other, -1.0))

    def __rtruediv__(self, other):
        return mul(other, power(self, -1.0))

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        out = Tensor(self.value[idx], (self,))

        def back(g):
            full = np.zeros_like(self.value)
            np.add.at(full, idx, g)
            self._accumulate(full)

        out._backward = back
        return out

    def __repr__(self):
        return f"Tensor(shape={self.value.shape})"


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _is_tensor(*xs) -> bool:
    return any(isinstance(x, Tensor) for x in xs)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum gradient ``g`` down to ``shape`` to undo numpy broadcasting."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# -- primitive ops (Tensor-aware, fall through to numpy otherwise) ----------


def add(a, b):
    if not _is_tensor(a, b):
        return np.add(a, b)
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.value + b.value, (a, b))

    def back(g):
        a._accumulate(_unbroadcast(g, a.value.shape))
        b._accumulate(_unbroadcast(g, b.value.shape))

    out._backward = back
    return out


def mul(a, b):
    if not _is_tensor(a, b):
        return np.multiply(a, b)
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.value * b.value, (a, b))

    def back(g):
        a._accumulate(_unbroadcast(g * b.value, a.value.shape))
        b._accumulate(_unbroadcast(g * a.value, b.value.shape))

    out._backward = back
    return out


def power(a, p: float):
    if not _is_tensor(a):
        return np.power(a, p)
    out = Tensor(np.power(a.value, p), (a,))

    def back(g):
        a._accumulate(_unbroadcast(g * p * np.power(a.value, p - 1.0), a.value.shape))

    out._backward = back
    return out


def matmul(a, b):
    if not _is_tensor(a, b):
        return np.matmul(a, b)
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.value @ b.value, (a, b))

    def back(g):
        av, bv = a.value, b.value
        if av.ndim == 2 and bv.ndim == 2:
            a._accumulate(g @ bv.T)
            b._accumulate(av.T @ g)
        elif av.ndim == 2 and bv.ndim == 1:
            a._accumulate(np.outer(g, bv))
            b._accumulate(av.T @ g)
        elif av.ndim == 1 and bv.ndim == 2:
            a._accumulate(g @ bv.T)
            b._accumulate(np.outer(av, g))
        elif av.ndim == 1 and bv.ndim == 1:
            a._accumulate(g * bv)
            b._accumulate(g * av)
        else:
            raise ValueError("unsupported matmul operand ranks")

    out._backward = back
    return out


def tanh(a):
    if not _is_tensor(a):
        return np.tanh(a)
    y = np.tanh(a.value)
    out = Tensor(y, (a,))

    def back(g):
        a._accumulate(g * (1.0 - y * y))

    out._backward = back
    return out


def exp(a):
    if not _is_tensor(a):
        return np.exp(a)
    y = np.exp(a.value)
    out = Tensor(y, (a,))
    out._backward = lambda g: a._accumulate(g * y)
    return out


def log(a):
    if not _is_tensor(a):
        return np.log(a)
    out = Tensor(np.log(a.value), (a,))
    out._backward = lambda g: a._accumulate(g / a.value)
    return out


def absolute(a):
    if not _is_tensor(a):
        return np.abs(a)
    out = Tensor(np.abs(a.value), (a,))
    out._backward = lambda g: a._accumulate(g * np.sign(a.value))
    return out


def maximum(a, b):
    """Elementwise max; at exact ties the gradient goes to the first operand."""
    if not _is_tensor(a, b):
        return np.maximum(a, b)
    a, b = _as_tensor(a), _as_tensor(b)
    mask = a.value >= b.value
    out = Tensor(np.where(mask, a.value, b.value), (a, b))

    def back(g):
        a._accumulate(_unbroadcast(g * mask, a.value.shape))
        b._accumulate(_unbroadcast(g * ~mask, b.value.shape))

    out._backward = back
    return out


def where(cond, a, b):
    """Select per element; ``cond`` is a plain boolean array, never a Tensor."""
    cond = np.asarray(cond, dtype=bool)
    if not _is_tensor(a, b):
        return np.where(cond, a, b)
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(np.where(cond, a.value, b.value), (a, b))

    def back(g):
        a._accumulate(_unbroadcast(g * cond, a.value.shape))
        b._accumulate(_unbroadcast(g * ~cond, b.value.shape))

    out._backward = back
    return out


def clip(a, lo: float, hi: float):
    """Clamp values into [lo, hi]; gradient is zero in the clamped region."""
    if not _is_tensor(a):
        return np.clip(a, lo, hi)
    mask = (a.value > lo) & (a.value < hi)
    out = Tensor(np.clip(a.value, lo, hi), (a,))
    out._backward = lambda g: a._accumulate(g * mask)
    return out


def tsum(a, axis=None):
    if not _is_tensor(a):
        return np.sum(a, axis=axis)
    out = Tensor(a.value.sum(axis=axis), (a,))

    def back(g):
        if axis is None:
            a._accumulate(np.broadcast_to(g, a.value.shape).copy())
        else:
            a._accumulate(np.broadcast_to(np.expand_dims(g, axis), a.value.shape).copy())

    out._backward = back
    return out


def tmean(a, axis=None):
    if not _is_tensor(a):
        return np.mean(a, axis=axis)
    n = a.value.size if axis is None else a.value.shape[axis]
    return mul(tsum(a, axis=axis), 1.0 / n)


def reshape(a, shape):
    if not _is_tensor(a):
        return np.reshape(a, shape)
    out = Tensor(a.value.reshape(shape), (a,))
    out._backward = lambda g: a._accumulate(g.reshape(a.value.shape))
    return out


def value_of(a) -> np.ndarray:
    """Unwrap to a plain ndarray regardless of input kind."""
    return a.value if isinstance(a, Tensor) else np.asarray(a, dtype=np.float64)
