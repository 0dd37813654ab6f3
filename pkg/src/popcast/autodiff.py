"""Reverse-mode automatic differentiation over dense numpy arrays.

Tape-style: every operation records its parents and a backward closure on
the produced Tensor; ``backward`` replays the closures in reverse
topological order, accumulating into per-node ``grad`` buffers. Data is
kept in float64 so finite-difference checks are meaningful; production
checkpoints store float32 (see model.save).

Subgradient conventions: relu'(0) = 0, d|x|/dx at 0 = 0.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_backward", "_done")

    def __init__(self, data, _parents=()):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._parents = _parents
        self._backward = None
        self._done = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        return f"Tensor(shape={self.shape})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def relu(self):
        return relu(self)

    def sigmoid(self):
        return sigmoid(self)

    def tanh(self):
        return tanh(self)


def _unbroadcast(grad, shape):
    # Reduce a broadcast gradient back to the operand's shape.
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, dim in enumerate(shape):
        if dim == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad.reshape(shape)


def _check_same_shape(a, b, op):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


def add(a, b):
    """Elementwise sum; supports bias-style broadcasting (matrix + vector)."""
    try:
        out = Tensor(a.data + b.data, (a, b))
    except ValueError:
        raise ShapeError(f"add: shapes {a.shape} and {b.shape} do not broadcast")

    def back():
        a.grad += _unbroadcast(out.grad, a.shape)
        b.grad += _unbroadcast(out.grad, b.shape)

    out._backward = back
    return out


def sub(a, b):
    try:
        out = Tensor(a.data - b.data, (a, b))
    except ValueError:
        raise ShapeError(f"sub: shapes {a.shape} and {b.shape} do not broadcast")

    def back():
        a.grad += _unbroadcast(out.grad, a.shape)
        b.grad -= _unbroadcast(out.grad, b.shape)

    out._backward = back
    return out


def mul(a, b):
    """Elementwise (Hadamard) product of same-shaped tensors."""
    _check_same_shape(a, b, "mul")
    out = Tensor(a.data * b.data, (a, b))

    def back():
        a.grad += b.data * out.grad
        b.grad += a.data * out.grad

    out._backward = back
    return out


def scale(a, c):
    """Multiply by a python scalar constant."""
    c = float(c)
    out = Tensor(a.data * c, (a,))

    def back():
        a.grad += c * out.grad

    out._backward = back
    return out


def matmul(a, b):
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul: need 2-d operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dims of {a.shape} and {b.shape} differ")
    out = Tensor(a.data @ b.data, (a, b))

    def back():
        a.grad += out.grad @ b.data.T
        b.grad += a.data.T @ out.grad

    out._backward = back
    return out


def concat(tensors, axis=1):
    tensors = list(tensors)
    ref = tensors[0].shape
    for t in tensors[1:]:
        if len(t.shape) != len(ref) or any(
            i != axis and t.shape[i] != ref[i] for i in range(len(ref))
        ):
            raise ShapeError(f"concat: shapes {[t.shape for t in tensors]} on axis {axis}")
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors))
    splits = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def back():
        for t, g in zip(tensors, np.split(out.grad, splits, axis=axis)):
            t.grad += g

    out._backward = back
    return out


def narrow(a, start, stop, axis=1):
    """Slice [start:stop) along one axis."""
    idx = tuple(slice(start, stop) if i == axis else slice(None) for i in range(a.data.ndim))
    out = Tensor(a.data[idx], (a,))

    def back():
        a.grad[idx] += out.grad

    out._backward = back
    return out


def reshape(a, shape):
    out = Tensor(a.data.reshape(shape), (a,))

    def back():
        a.grad += out.grad.reshape(a.shape)

    out._backward = back
    return out


def relu(a):
    out = Tensor(np.maximum(a.data, 0.0), (a,))

    def back():
        a.grad += (a.data > 0) * out.grad  # zero subgradient at exactly 0

    out._backward = back
    return out


# max(0, x) written as a clamp; identical value and subgradient convention.
clamp_min0 = relu


def sigmoid(a):
    out = Tensor(1.0 / (1.0 + np.exp(-a.data)), (a,))

    def back():
        a.grad += out.data * (1.0 - out.data) * out.grad

    out._backward = back
    return out


def tanh(a):
    out = Tensor(np.tanh(a.data), (a,))

    def back():
        a.grad += (1.0 - out.data ** 2) * out.grad

    out._backward = back
    return out


def conv2d_single_channel(x, kernel, bias=None, padding=(0, 0)):
    """Single-in, single-out channel 2-d correlation over a batch.

    x: (B, H, W); kernel: (kh, kw); bias: scalar Tensor or None;
    padding: zeros added per axis, (ph, pw) on both sides.
    """
    if x.data.ndim != 3 or kernel.data.ndim != 2:
        raise ShapeError(f"conv2d: need (B,H,W) input and (kh,kw) kernel, got {x.shape} and {kernel.shape}")
    kh, kw = kernel.shape
    ph, pw = padding
    xp = np.pad(x.data, ((0, 0), (ph, ph), (pw, pw)))
    oh = xp.shape[1] - kh + 1
    ow = xp.shape[2] - kw + 1
    if oh < 1 or ow < 1:
        raise ShapeError(f"conv2d: kernel {kernel.shape} larger than padded input {xp.shape}")
    val = np.zeros((x.shape[0], oh, ow))
    for u in range(kh):
        for v in range(kw):
            val += kernel.data[u, v] * xp[:, u : u + oh, v : v + ow]
    parents = (x, kernel) if bias is None else (x, kernel, bias)
    if bias is not None:
        val = val + bias.data
    out = Tensor(val, parents)

    def back():
        gxp = np.zeros_like(xp)
        for u in range(kh):
            for v in range(kw):
                kernel.grad[u, v] += (xp[:, u : u + oh, v : v + ow] * out.grad).sum()
                gxp[:, u : u + oh, v : v + ow] += kernel.data[u, v] * out.grad
        h, w = x.shape[1], x.shape[2]
        x.grad += gxp[:, ph : ph + h, pw : pw + w]
        if bias is not None:
            bias.grad += out.grad.sum()

    out._backward = back
    return out


def smooth_l1(pred, target, beta=0.1):
    """Mean-reduced smooth-L1: 0.5 z^2 / beta if |z| < beta else |z| - beta/2."""
    _check_same_shape(pred, target, "smooth_l1")
    z = pred.data - target.data
    az = np.abs(z)
    quad = az < beta
    elems = np.where(quad, 0.5 * z * z / beta, az - 0.5 * beta)
    out = Tensor(elems.mean(), (pred, target))
    n = z.size

    def back():
        dz = np.where(quad, z / beta, np.sign(z)) * (out.grad / n)
        pred.grad += dz
        target.grad -= dz

    out._backward = back
    return out


def abs_sum(a):
    out = Tensor(np.abs(a.data).sum(), (a,))

    def back():
        a.grad += np.sign(a.data) * out.grad  # sign(0) = 0

    out._backward = back
    return out


def mean(a):
    out = Tensor(a.data.mean(), (a,))

    def back():
        a.grad += np.full(a.shape, out.grad / a.size)

    out._backward = back
    return out


def _topo_order(root):
    order, visited, stack = [], set(), [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            stack.append((p, False))
    return order


def backward(root):
    """Populate grad buffers for every node reachable from a scalar root.

    Each recorded operation runs exactly once, in reverse topological
    order. Re-running backward on the same root raises; build a fresh
    graph per pass instead.
    """
    if root.size != 1:
        raise ShapeError(f"backward: root must be scalar, got shape {root.shape}")
    if root._done:
        raise RuntimeError("backward already ran for this root; rebuild the graph")
    root._done = True
    order = _topo_order(root)
    for node in order:
        if node.grad is None:
            node.grad = np.zeros(node.shape)
    root.grad = np.ones(root.shape)
    for node in reversed(order):
        if node._backward is not None:
            node._backward()


def snap_f32(data):
    """Round values to the nearest float32-representable double.

    Parameters live in float64 for finite-difference checkability but are
    serialized as float32; snapping after every update keeps the in-memory
    and on-disk values bit-identical.
    """
    return data.astype("<f4").astype(np.float64)
