"""Reverse-mode automatic differentiation on numpy arrays.

A :class:`Tensor` wraps an ``ndarray`` and remembers the operation that made
it.  Calling :meth:`Tensor.backward` on a scalar walks the recorded graph in
reverse topological order and accumulates gradients into every leaf tensor
created with ``requires_grad=True``.
"""
from __future__ import annotations

import numpy as np


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` (undo numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    ndiff = grad.ndim - len(shape)
    if ndiff > 0:
        grad = grad.sum(axis=tuple(range(ndiff)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def as_tensor(x, dtype=None):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


class Tensor:
    """n-dimensional real array that participates in reverse-mode differentiation."""

    __array_priority__ = 100.0

    def __init__(self, data, requires_grad=False, parents=(), backward_fn=None, op=""):
        data = np.asarray(data)
        if not np.issubdtype(data.dtype, np.floating):
            data = data.astype(np.float64)
        self.data = data
        self.requires_grad = bool(requires_grad) or any(p.requires_grad for p in parents)
        self.grad = None
        self._parents = tuple(parents) if self.requires_grad else ()
        self._backward_fn = backward_fn if self.requires_grad else None
        self._op = op

    # ------------------------------------------------------------------ info
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self):
        return not self._parents

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self._op or 'leaf'}, requires_grad={self.requires_grad})"

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    # -------------------------------------------------------------- backward
    def backward(self, grad=None):
        """Accumulate d(self)/d(leaf) into ``leaf.grad`` for every tracked leaf.

        Intermediate gradients live only for the duration of the call, so a
        second call on the same graph adds the same contribution again.
        """
        if grad is None:
            if self.data.size != 1 or self.data.ndim != 0:
                raise ValueError(f"backward() needs a rank-0 tensor, got shape {self.shape}")
            grad = np.ones_like(self.data)
        if not self.requires_grad:
            raise ValueError("backward() called on a tensor that is not on the tape")

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
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))

        grads = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.is_leaf:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            parent_grads = node._backward_fn(g)
            for p, pg in zip(node._parents, parent_grads):
                if pg is None or not p.requires_grad:
                    continue
                pg = _unbroadcast(pg, p.shape)
                if id(p) in grads:
                    grads[id(p)] = grads[id(p)] + pg
                else:
                    grads[id(p)] = pg

    # ------------------------------------------------------------ arithmetic
    def __add__(self, other):
        other = as_tensor(other, self.dtype)
        return Tensor(self.data + other.data, parents=(self, other),
                      backward_fn=lambda g: (g, g), op="add")

    __radd__ = __add__

    def __neg__(self):
        return Tensor(-self.data, parents=(self,), backward_fn=lambda g: (-g,), op="neg")

    def __sub__(self, other):
        other = as_tensor(other, self.dtype)
        return Tensor(self.data - other.data, parents=(self, other),
                      backward_fn=lambda g: (g, -g), op="sub")

    def __rsub__(self, other):
        return as_tensor(other, self.dtype) - self

    def __mul__(self, other):
        other = as_tensor(other, self.dtype)
        a, b = self.data, other.data
        return Tensor(a * b, parents=(self, other),
                      backward_fn=lambda g: (g * b, g * a), op="mul")

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other, self.dtype)
        a, b = self.data, other.data
        return Tensor(a / b, parents=(self, other),
                      backward_fn=lambda g: (g / b, -g * a / (b * b)), op="div")

    def __rtruediv__(self, other):
        return as_tensor(other, self.dtype) / self

    def __pow__(self, exponent):
        if isinstance(exponent, Tensor):
            raise TypeError("only constant exponents are supported")
        a = self.data
        return Tensor(a ** exponent, parents=(self,),
                      backward_fn=lambda g: (g * exponent * a ** (exponent - 1),), op="pow")

    def __matmul__(self, other):
        other = as_tensor(other, self.dtype)
        a, b = self.data, other.data

        def backward(g):
            if b.ndim == 1:
                ga = np.multiply.outer(g, b)
                gb = np.tensordot(a, g, axes=(tuple(range(a.ndim - 1)), tuple(range(g.ndim))))
                return ga, gb
            ga = g @ np.swapaxes(b, -1, -2)
            gb = np.swapaxes(a, -1, -2) @ g
            return ga, gb

        return Tensor(a @ b, parents=(self, other), backward_fn=backward, op="matmul")

    def __getitem__(self, idx):
        shape = self.shape

        def backward(g):
            out = np.zeros(shape, dtype=g.dtype)
            np.add.at(out, idx, g)
            return (out,)

        return Tensor(self.data[idx], parents=(self,), backward_fn=backward, op="getitem")

    # ------------------------------------------------------------ reductions
    def sum(self, axis=None, keepdims=False):
        shape = self.shape

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape),)

        return Tensor(self.data.sum(axis=axis, keepdims=keepdims), parents=(self,),
                      backward_fn=backward, op="sum")

    def mean(self, axis=None, keepdims=False):
        if axis is None:
            n = self.data.size
        else:
            axes = (axis,) if isinstance(axis, int) else axis
            n = int(np.prod([self.shape[a] for a in axes]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    # ---------------------------------------------------------------- shapes
    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.shape
        return Tensor(self.data.reshape(shape), parents=(self,),
                      backward_fn=lambda g: (g.reshape(old),), op="reshape")

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        inv = np.argsort(axes)
        return Tensor(self.data.transpose(axes), parents=(self,),
                      backward_fn=lambda g: (g.transpose(inv),), op="transpose")

    @property
    def T(self):
        return self.transpose()

    # ----------------------------------------------------------- elementwise
    def exp(self):
        out = np.exp(self.data)
        return Tensor(out, parents=(self,), backward_fn=lambda g: (g * out,), op="exp")

    def log(self):
        a = self.data
        return Tensor(np.log(a), parents=(self,), backward_fn=lambda g: (g / a,), op="log")

    def relu(self):
        mask = self.data > 0
        return Tensor(np.where(mask, self.data, 0.0).astype(self.dtype), parents=(self,),
                      backward_fn=lambda g: (g * mask,), op="relu")

    def sigmoid(self):
        a = self.data
        out = np.empty_like(a)
        pos = a >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
        e = np.exp(a[~pos])
        out[~pos] = e / (1.0 + e)
        return Tensor(out, parents=(self,), backward_fn=lambda g: (g * out * (1.0 - out),),
                      op="sigmoid")

    def clip(self, lo, hi):
        a = self.data
        mask = (a >= lo) & (a <= hi)
        return Tensor(np.clip(a, lo, hi), parents=(self,), backward_fn=lambda g: (g * mask,),
                      op="clip")


def concatenate(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor(np.concatenate([t.data for t in tensors], axis=axis), parents=tuple(tensors),
                  backward_fn=backward, op="concat")
