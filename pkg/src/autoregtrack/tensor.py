"""Minimal dense tensor with reverse-mode automatic differentiation.

Tensors wrap float64 numpy arrays. Every op records its parents and a local
backward rule on the output, so the graph is rebuilt on each forward pass and
``Tensor.backward`` walks it in reverse topological order.

>>> x = Tensor([3.0], requires_grad=True)
>>> (x * x).sum().backward()
>>> x.grad
array([6.])
"""

from __future__ import annotations

import contextlib
import math
from typing import Callable, Sequence

import numpy as np

from . import _kernels as K

LN_EPS = 1e-6


class NumericError(ArithmeticError):
    """A forward op produced NaN or Inf."""


class ShapeError(ValueError):
    pass


class MaskError(ValueError):
    """An attention query row has no allowed key."""


_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.array(data, dtype=np.float64)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad = None
        self._parents: tuple = ()
        self._backward = None
        self.op = "leaf"

    # -- basic properties -------------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def __len__(self):
        return self.data.shape[0]

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> "Tensor":
        t = Tensor.__new__(Tensor)
        t.data = self.data
        t.requires_grad = False
        t.grad = None
        t._parents = ()
        t._backward = None
        t.op = "detach"
        return t

    def zero_grad(self):
        self.grad = None

    # -- autodiff ---------------------------------------------------------
    def backward(self, grad=None):
        """Accumulate d(self)/d(leaf) into every ``requires_grad`` leaf."""
        if grad is None:
            if self.data.size != 1:
                raise ShapeError("backward() without a seed needs a scalar output")
            grad = np.ones_like(self.data)
        order = _topological(self)
        grads = {id(self): np.asarray(grad, dtype=np.float64)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

    # -- operator sugar ---------------------------------------------------
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

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, p: float):
        return power(self, p)

    def __getitem__(self, idx):
        return take(self, idx)

    @property
    def T(self):
        return transpose(self)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def _topological(root: Tensor) -> list:
    order, seen = [], set()
    stack = [(root, False)]
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
    return order


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data, parents, backward, op) -> Tensor:
    if not np.isfinite(data).all():
        raise NumericError(f"non-finite value produced by {op}")
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.op = op
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    else:
        out.requires_grad = False
        out._parents = ()
        out._backward = None
    return out


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# -- elementwise arithmetic ----------------------------------------------
def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError as exc:
        raise ShapeError(str(exc)) from None
    return _result(data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data - b.data
    except ValueError as exc:
        raise ShapeError(str(exc)) from None
    return _result(data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)), "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError as exc:
        raise ShapeError(str(exc)) from None
    return _result(data, (a, b),
                   lambda g: (_unbroadcast(g * b.data, a.shape),
                              _unbroadcast(g * a.data, b.shape)), "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data / b.data
    except ValueError as exc:
        raise ShapeError(str(exc)) from None

    def backward(g):
        return (_unbroadcast(g / b.data, a.shape),
                _unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return _result(data, (a, b), backward, "div")


def scale(x: Tensor, c: float) -> Tensor:
    return _result(x.data * c, (x,), lambda g: (g * c,), "scale")


def power(x: Tensor, p: float) -> Tensor:
    data = x.data ** p
    return _result(data, (x,), lambda g: (g * p * x.data ** (p - 1),), "pow")


def exp(x: Tensor) -> Tensor:
    data = np.exp(x.data)
    return _result(data, (x,), lambda g: (g * data,), "exp")


def log(x: Tensor) -> Tensor:
    with np.errstate(divide="ignore", invalid="ignore"):
        data = np.log(x.data)
    return _result(data, (x,), lambda g: (g / x.data,), "log")


def sqrt(x: Tensor) -> Tensor:
    with np.errstate(invalid="ignore"):
        data = np.sqrt(x.data)
    return _result(data, (x,), lambda g: (g * 0.5 / data,), "sqrt")


def absolute(x: Tensor) -> Tensor:
    return _result(np.abs(x.data), (x,), lambda g: (g * np.sign(x.data),), "abs")


def maximum(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = np.maximum(a.data, b.data)
    pick = a.data >= b.data

    def backward(g):
        return (_unbroadcast(np.where(pick, g, 0.0), a.shape),
                _unbroadcast(np.where(pick, 0.0, g), b.shape))

    return _result(data, (a, b), backward, "maximum")


def minimum(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = np.minimum(a.data, b.data)
    pick = a.data <= b.data

    def backward(g):
        return (_unbroadcast(np.where(pick, g, 0.0), a.shape),
                _unbroadcast(np.where(pick, 0.0, g), b.shape))

    return _result(data, (a, b), backward, "minimum")


def clamp_min(x: Tensor, lo: float) -> Tensor:
    keep = x.data > lo
    return _result(np.where(keep, x.data, lo), (x,), lambda g: (np.where(keep, g, 0.0),),
                   "clamp_min")


def sigmoid(x: Tensor) -> Tensor:
    data = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return _result(data, (x,), lambda g: (g * data * (1.0 - data),), "sigmoid")


def gelu(x: Tensor) -> Tensor:
    """Exact (erf) GELU."""
    xd = np.ascontiguousarray(x.data)
    return _result(K.gelu(xd), (x,), lambda g: (K.gelu_backward(xd, g),), "gelu")


# -- shape ops --------------------------------------------------------------
def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul dimension mismatch: {a.shape} @ {b.shape}")
    data = a.data @ b.data
    return _result(data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g), "matmul")


def transpose(x: Tensor) -> Tensor:
    if x.ndim != 2:
        raise ShapeError("transpose needs a matrix")
    return _result(x.data.T.copy(), (x,), lambda g: (g.T,), "transpose")


def reshape(x: Tensor, shape) -> Tensor:
    try:
        data = x.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(str(exc)) from None
    return _result(data, (x,), lambda g: (g.reshape(x.shape),), "reshape")


def tsum(x: Tensor, axis=None, keepdims=False) -> Tensor:
    data = np.asarray(x.data.sum(axis=axis, keepdims=keepdims))

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _result(data, (x,), backward, "sum")


def mean(x: Tensor, axis=None, keepdims=False) -> Tensor:
    n = x.data.size if axis is None else x.shape[axis]
    return scale(tsum(x, axis, keepdims), 1.0 / n)


def take(x: Tensor, idx) -> Tensor:
    """Basic slicing or integer-array row gather; repeated indices accumulate."""
    data = x.data[idx]
    fancy = isinstance(idx, (list, np.ndarray)) or (
        isinstance(idx, tuple) and any(isinstance(i, (list, np.ndarray)) for i in idx))

    def backward(g):
        full = np.zeros_like(x.data)
        if fancy:
            np.add.at(full, idx, g)
        else:
            full[idx] = g
        return (full,)

    return _result(np.array(data, dtype=np.float64), (x,), backward, "take")


def embedding_lookup(table: Tensor, ids) -> Tensor:
    return take(table, np.asarray(ids, dtype=np.intp))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError(str(exc)) from None
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _result(data, tensors, backward, "concat")


def where_rows(rows, x: Tensor, fill: Tensor) -> Tensor:
    """Replace the selected rows of ``x`` by the single row ``fill`` (1, d)."""
    rows = np.asarray(rows, dtype=bool)
    sel = rows[:, None]
    data = np.where(sel, fill.data, x.data)

    def backward(g):
        return (np.where(sel, 0.0, g), np.where(sel, g, 0.0).sum(axis=0, keepdims=True))

    return _result(data, (x, fill), backward, "where_rows")


# -- normalisation and attention --------------------------------------------
def softmax(x: Tensor, axis: int = -1) -> Tensor:
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    data = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (data * (g - (g * data).sum(axis=axis, keepdims=True)),)

    return _result(data, (x,), backward, "softmax")


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    z = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    data = z - lse
    p = np.exp(data)

    def backward(g):
        return (g - p * g.sum(axis=axis, keepdims=True),)

    return _result(data, (x,), backward, "log_softmax")


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = LN_EPS) -> Tensor:
    if x.ndim != 2 or gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
        raise ShapeError("layer_norm expects x[n, d], gamma[d], beta[d]")
    y, xhat, rstd = K.layer_norm(np.ascontiguousarray(x.data), gamma.data, beta.data, eps)

    def backward(g):
        return K.layer_norm_backward(np.ascontiguousarray(g), xhat, rstd, gamma.data)

    return _result(y, (x, gamma, beta), backward, "layer_norm")


def masked_attention(q: Tensor, k: Tensor, v: Tensor, mask, heads: int = 1,
                     record: list | None = None) -> Tensor:
    """Scaled dot-product attention where ``mask[i, j] == False`` blocks key j.

    Heads are processed one at a time over column blocks of q, k and v. If
    ``record`` is a list, the (heads, nq, nk) weight array is appended to it.
    """
    mask = np.asarray(mask, dtype=bool)
    nq, d = q.shape
    nk = k.shape[0]
    if k.shape[1] != d or v.shape[0] != nk or mask.shape != (nq, nk) or d % heads:
        raise ShapeError(f"attention shapes q{q.shape} k{k.shape} v{v.shape} mask{mask.shape}")
    if not mask.any(axis=1).all():
        raise MaskError("attention query row with no allowed key")
    dh = d // heads
    dv = v.shape[1] // heads
    s = 1.0 / math.sqrt(dh)
    qd, kd, vd = q.data, k.data, v.data
    probs = []
    out = np.empty((nq, v.shape[1]))
    for h in range(heads):
        qs, vs = slice(h * dh, (h + 1) * dh), slice(h * dv, (h + 1) * dv)
        logits = np.ascontiguousarray(qd[:, qs] @ kd[:, qs].T) * s
        p = K.masked_softmax(logits, mask)
        probs.append(p)
        out[:, vs] = p @ vd[:, vs]
    if record is not None:
        record.append(np.stack(probs))

    def backward(g):
        dq = np.empty_like(qd)
        dk = np.empty_like(kd)
        dvv = np.empty_like(vd)
        for h in range(heads):
            qs, vs = slice(h * dh, (h + 1) * dh), slice(h * dv, (h + 1) * dv)
            p = probs[h]
            gh = g[:, vs]
            dvv[:, vs] = p.T @ gh
            ds = K.masked_softmax_backward(p, np.ascontiguousarray(gh @ vd[:, vs].T)) * s
            dq[:, qs] = ds @ kd[:, qs]
            dk[:, qs] = ds.T @ qd[:, qs]
        return dq, dk, dvv

    return _result(out, (q, k, v), backward, "masked_attention")


# -- validation harness -------------------------------------------------
def grad_check(f: Callable[[Tensor], Tensor], x, h: float = 1e-5) -> float:
    """Max over coordinates of |autodiff - central difference| / max(1, |fd|)."""
    x0 = np.array(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    xt = Tensor(x0.copy(), requires_grad=True)
    y = f(xt)
    if not np.isfinite(y.data).all():
        raise NumericError("grad_check: f(x) is not finite")
    y.backward()
    ad = np.zeros_like(x0) if xt.grad is None else xt.grad
    fd = np.empty_like(x0)
    flat = x0.reshape(-1)
    for i in range(flat.size):
        xp = flat.copy()
        xm = flat.copy()
        xp[i] += h
        xm[i] -= h
        with no_grad():
            fp = f(Tensor(xp.reshape(x0.shape))).item()
            fm = f(Tensor(xm.reshape(x0.shape))).item()
        fd.reshape(-1)[i] = (fp - fm) / (2.0 * h)
    return float(np.max(np.abs(ad - fd) / np.maximum(1.0, np.abs(fd))))
