"""Minimal reverse-mode tape over numpy arrays.

Ops are free functions that accept either plain ndarrays or ``Var`` nodes;
with plain inputs they just compute numpy values, with ``Var`` inputs they
record the graph. Loss code is therefore written once and serves both the
numeric evaluation path and training.

Convolutions lower to an im2col/col2im pair (adjoints of each other) plus
BLAS matmul; the pack/unpack kernels live in ``tcwae.kernels`` with a
compiled core and a numpy fallback.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .numerics import sigmoid as _sigmoid_np


class Var:
    """A node in the computation graph wrapping an ndarray value."""

    __slots__ = ("value", "grad", "parents", "vjp", "requires_grad")

    def __init__(self, value, parents=(), vjp=None, requires_grad=True):
        self.value = np.asarray(value)
        self.grad = None
        self.parents = parents
        self.vjp = vjp
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.value.shape

    @property
    def dtype(self):
        return self.value.dtype

    def backward(self):
        if self.value.shape != ():
            raise ValueError("backward() expects a scalar root")
        order = _topo_order(self)
        self.grad = np.ones((), dtype=self.value.dtype)
        for node in reversed(order):
            if node.vjp is None or node.grad is None:
                continue
            gs = node.vjp(node.grad)
            for parent, g in zip(node.parents, gs):
                if g is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = g
                else:
                    parent.grad = parent.grad + g

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

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, k):
        return pow_const(self, k)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return take(self, key)


def _topo_order(root: Var):
    order, seen, stack = [], set(), [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def is_var(x) -> bool:
    return isinstance(x, Var)


def value_of(x):
    return x.value if isinstance(x, Var) else np.asarray(x)


def constant(x) -> Var:
    return Var(x, requires_grad=False)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == tuple(shape):
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def _coerce(x):
    """Var -> value; python scalars stay weak so they don't upcast f32 graphs."""
    if isinstance(x, Var):
        return x.value
    if isinstance(x, (int, float)) and not isinstance(x, np.generic):
        return x
    return np.asarray(x)


def _binary(a, b, fwd, vjp_a, vjp_b):
    if not (is_var(a) or is_var(b)):
        return fwd(_coerce(a), _coerce(b))
    av, bv = _coerce(a), _coerce(b)
    out_val = fwd(av, bv)
    parents, grads = [], []
    if is_var(a):
        parents.append(a)
        grads.append(lambda g: _unbroadcast(vjp_a(g, av, bv), av.shape))
    if is_var(b):
        parents.append(b)
        grads.append(lambda g: _unbroadcast(vjp_b(g, av, bv), bv.shape))
    req = any(p.requires_grad for p in parents)
    out = Var(out_val, tuple(parents), None, req)
    out.vjp = lambda g: tuple(fn(g) for fn in grads)
    return out


def add(a, b):
    return _binary(a, b, lambda x, y: x + y, lambda g, x, y: g, lambda g, x, y: g)


def sub(a, b):
    return _binary(a, b, lambda x, y: x - y, lambda g, x, y: g, lambda g, x, y: -g)


def mul(a, b):
    return _binary(a, b, lambda x, y: x * y, lambda g, x, y: g * y, lambda g, x, y: g * x)


def div(a, b):
    return _binary(
        a,
        b,
        lambda x, y: x / y,
        lambda g, x, y: g / y,
        lambda g, x, y: -g * x / (y * y),
    )


def matmul(a, b):
    if not (is_var(a) or is_var(b)):
        return np.asarray(a) @ np.asarray(b)
    av, bv = value_of(a), value_of(b)
    out_val = av @ bv
    parents, grads = [], []
    if is_var(a):
        parents.append(a)
        grads.append(lambda g: g @ bv.T)
    if is_var(b):
        parents.append(b)
        grads.append(lambda g: av.T @ g)
    out = Var(out_val, tuple(parents), None, any(p.requires_grad for p in parents))
    out.vjp = lambda g: tuple(fn(g) for fn in grads)
    return out


def _unary(x, fwd, make_vjp):
    if not is_var(x):
        return fwd(np.asarray(x))
    xv = x.value
    out_val = fwd(xv)
    out = Var(out_val, (x,), None, x.requires_grad)
    vjp = make_vjp(xv, out_val)
    out.vjp = lambda g: (vjp(g),)
    return out


def exp(x):
    return _unary(x, np.exp, lambda xv, ov: lambda g: g * ov)


def log(x):
    return _unary(x, np.log, lambda xv, ov: lambda g: g / xv)


def sqrt(x):
    return _unary(x, np.sqrt, lambda xv, ov: lambda g: g * 0.5 / ov)


def square(x):
    return _unary(x, np.square, lambda xv, ov: lambda g: g * 2.0 * xv)


def pow_const(x, k: float):
    return _unary(x, lambda v: v ** k, lambda xv, ov: lambda g: g * k * xv ** (k - 1))


def relu(x):
    return _unary(x, lambda v: np.maximum(v, 0), lambda xv, ov: lambda g: g * (xv > 0))


def sigmoid(x):
    return _unary(x, _sigmoid_np, lambda xv, ov: lambda g: g * ov * (1.0 - ov))


def softplus(x):
    return _unary(x, lambda v: np.logaddexp(0.0, v), lambda xv, ov: lambda g: g * _sigmoid_np(xv))


def clip(x, lo: float, hi: float):
    """Clamp with pass-through gradient strictly inside the interval."""
    return _unary(
        x,
        lambda v: np.clip(v, lo, hi),
        lambda xv, ov: lambda g: g * ((xv > lo) & (xv < hi)),
    )


def reshape(x, shape):
    if not is_var(x):
        return np.reshape(x, shape)
    orig = x.value.shape
    out = Var(x.value.reshape(shape), (x,), None, x.requires_grad)
    out.vjp = lambda g: (g.reshape(orig),)
    return out


def transpose2d(x):
    if not is_var(x):
        return np.asarray(x).T
    out = Var(x.value.T, (x,), None, x.requires_grad)
    out.vjp = lambda g: (g.T,)
    return out


def take(x, key):
    if not is_var(x):
        return np.asarray(x)[key]
    xv = x.value
    out = Var(xv[key], (x,), None, x.requires_grad)

    def vjp(g):
        full = np.zeros_like(xv)
        np.add.at(full, key, g)
        return full

    out.vjp = lambda g: (vjp(g),)
    return out


def sum_(x, axis=None, keepdims=False):
    if not is_var(x):
        return np.sum(x, axis=axis, keepdims=keepdims)
    xv = x.value
    out_val = np.sum(xv, axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is None:
            return np.broadcast_to(g, xv.shape).astype(xv.dtype, copy=False)
        gg = g if keepdims else np.expand_dims(g, axis)
        return np.broadcast_to(gg, xv.shape).astype(xv.dtype, copy=False)

    out = Var(out_val, (x,), None, x.requires_grad)
    out.vjp = lambda g: (vjp(g),)
    return out


def mean(x, axis=None, keepdims=False):
    xv = value_of(x)
    if axis is None:
        n = xv.size
    elif isinstance(axis, tuple):
        n = int(np.prod([xv.shape[a] for a in axis]))
    else:
        n = xv.shape[axis]
    return mul(sum_(x, axis=axis, keepdims=keepdims), 1.0 / n)


def logsumexp(x, axis: int):
    """Max-shifted log-sum-exp along ``axis``; gradient is the softmax."""
    if not is_var(x):
        xv = np.asarray(x)
        m = np.max(xv, axis=axis, keepdims=True)
        m = np.where(np.isfinite(m), m, 0.0)
        return np.squeeze(m, axis=axis) + np.log(np.sum(np.exp(xv - m), axis=axis))
    xv = x.value
    m = np.max(xv, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    ex = np.exp(xv - m)
    denom = np.sum(ex, axis=axis, keepdims=True)
    out_val = np.squeeze(m, axis=axis) + np.log(np.squeeze(denom, axis=axis))
    softmax = ex / denom

    def vjp(g):
        return np.expand_dims(g, axis) * softmax

    out = Var(out_val, (x,), None, x.requires_grad)
    out.vjp = lambda g: (vjp(g),)
    return out


def im2col(x, kh: int, kw: int, stride: int, pad: int):
    """Window-pack [B,H,W,C] into [B*Ho*Wo, kh*kw*C]; adjoint of col2im."""
    if not is_var(x):
        return kernels.im2col(np.asarray(x), kh, kw, stride, pad)
    B, H, W, C = x.value.shape
    out_val = kernels.im2col(x.value, kh, kw, stride, pad)
    out = Var(out_val, (x,), None, x.requires_grad)
    out.vjp = lambda g: (kernels.col2im(np.ascontiguousarray(g), B, H, W, C, kh, kw, stride, pad),)
    return out


def col2im(cols, image_shape, kh: int, kw: int, stride: int, pad: int):
    """Scatter-add columns back to [B,H,W,C]; adjoint of im2col."""
    B, H, W, C = image_shape
    if not is_var(cols):
        return kernels.col2im(np.ascontiguousarray(cols), B, H, W, C, kh, kw, stride, pad)
    out_val = kernels.col2im(np.ascontiguousarray(cols.value), B, H, W, C, kh, kw, stride, pad)
    out = Var(out_val, (cols,), None, cols.requires_grad)
    out.vjp = lambda g: (kernels.im2col(g, kh, kw, stride, pad),)
    return out
