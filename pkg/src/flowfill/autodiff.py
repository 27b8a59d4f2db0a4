"""Reverse-mode automatic differentiation over dense numpy arrays.

Deliberately small: the networks in this package stay in the tens of
thousands of parameters, so exact gradients and readable closures win
over speed. Every op records a backward closure on its output; `backward`
walks the graph in reverse topological order and accumulates gradients
into `.grad` buffers. float64 throughout, so finite-difference checks
are meaningful.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from .errors import NumericError

__all__ = [
    "Tensor",
    "ModelParams",
    "no_grad",
    "backward",
    "concat",
    "embedding",
    "softmax",
    "gelu",
]

_grad_enabled = True


@contextmanager
def no_grad():
    """Skip graph recording inside the block (inference paths)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` over the axes numpy broadcast in the forward op."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """A numpy array plus a gradient buffer and the op that produced it."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_grad_owned")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        # leaves keep a persistent owned buffer; intermediates borrow the first
        # incoming gradient and only materialize a sum on a second contribution
        self.grad = np.zeros_like(self.data) if requires_grad else None
        self._grad_owned = requires_grad
        self._parents: tuple = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- graph construction -------------------------------------------------

    @staticmethod
    def _make(data, parents, backward_fn):
        out = Tensor(data)
        if _grad_enabled:
            for p in parents:
                if p.requires_grad:
                    out.requires_grad = True
                    out._parents = parents
                    out._backward = backward_fn
                    out._grad_owned = False
                    break
        return out

    def _accumulate(self, grad):
        if self.grad is None:
            self.grad = grad
        elif self._grad_owned:
            self.grad += grad
        else:
            self.grad = self.grad + grad
            self._grad_owned = True

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other):
        other = _wrap(other)
        out_data = self.data + other.data

        def bw(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g, self.data.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g, other.data.shape))

        return Tensor._make(out_data, (self, other), bw)

    __radd__ = __add__

    def __mul__(self, other):
        other = _wrap(other)
        out_data = self.data * other.data

        def bw(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g * other.data, self.data.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g * self.data, other.data.shape))

        return Tensor._make(out_data, (self, other), bw)

    __rmul__ = __mul__

    def __neg__(self):
        return self * (-1.0)

    def __sub__(self, other):
        return self + (-_wrap(other))

    def __rsub__(self, other):
        return _wrap(other) + (-self)

    def __truediv__(self, other):
        other = _wrap(other)
        return self * (other ** -1.0)

    def __rtruediv__(self, other):
        return _wrap(other) * (self ** -1.0)

    def __pow__(self, p):
        if not isinstance(p, (int, float)):
            raise TypeError("only scalar exponents are supported")
        out_data = self.data ** p

        def bw(g):
            if self.requires_grad:
                self._accumulate(g * p * self.data ** (p - 1))

        return Tensor._make(out_data, (self,), bw)

    def __matmul__(self, other):
        other = _wrap(other)
        out_data = np.matmul(self.data, other.data)

        def bw(g):
            if self.requires_grad:
                ga = np.matmul(g, np.swapaxes(other.data, -1, -2))
                self._accumulate(_reduce_batch(ga, self.data.shape))
            if other.requires_grad:
                gb = np.matmul(np.swapaxes(self.data, -1, -2), g)
                other._accumulate(_reduce_batch(gb, other.data.shape))

        return Tensor._make(out_data, (self, other), bw)

    # -- elementwise functions ------------------------------------------------

    def exp(self):
        out_data = np.exp(self.data)

        def bw(g):
            if self.requires_grad:
                self._accumulate(g * out_data)

        return Tensor._make(out_data, (self,), bw)

    def log(self):
        out_data = np.log(self.data)

        def bw(g):
            if self.requires_grad:
                self._accumulate(g / self.data)

        return Tensor._make(out_data, (self,), bw)

    def tanh(self):
        out_data = np.tanh(self.data)

        def bw(g):
            if self.requires_grad:
                self._accumulate(g * (1.0 - out_data ** 2))

        return Tensor._make(out_data, (self,), bw)

    # -- reductions ------------------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        out_data = self.data.sum(axis=axis, keepdims=keepdims)

        def bw(g):
            if not self.requires_grad:
                return
            gg = np.asarray(g)
            if axis is not None and not keepdims:
                gg = np.expand_dims(gg, axis)
            self._accumulate(np.broadcast_to(gg, self.data.shape).copy())

        return Tensor._make(out_data, (self,), bw)

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    # -- shape manipulation ------------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        out_data = self.data.reshape(shape)

        def bw(g):
            if self.requires_grad:
                self._accumulate(g.reshape(self.data.shape))

        return Tensor._make(out_data, (self,), bw)

    def transpose(self, axes):
        out_data = self.data.transpose(axes)
        inv = np.argsort(axes)

        def bw(g):
            if self.requires_grad:
                self._accumulate(g.transpose(inv))

        return Tensor._make(out_data, (self,), bw)

    def __getitem__(self, idx):
        out_data = self.data[idx]

        def bw(g):
            if self.requires_grad:
                full = np.zeros_like(self.data)
                full[idx] = g
                self._accumulate(full)

        return Tensor._make(out_data, (self,), bw)

    # -- backward ------------------------------------------------------------------

    def backward(self):
        backward(self)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _reduce_batch(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Collapse extra leading batch axes a matmul operand was broadcast over."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    return grad


def concat(tensors, axis=0):
    tensors = [_wrap(t) for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                t._accumulate(g[tuple(sl)])

    return Tensor._make(out_data, tuple(tensors), bw)


def embedding(table: Tensor, ids) -> Tensor:
    """Row gather `table[ids]` with scatter-add backward."""
    ids = np.asarray(ids, dtype=np.int64)
    out_data = table.data[ids]

    def bw(g):
        if table.requires_grad:
            full = np.zeros_like(table.data)
            np.add.at(full, ids, g)
            table._accumulate(full)

    return Tensor._make(out_data, (table,), bw)


def softmax(x: Tensor, additive_mask=None) -> Tensor:
    """Numerically stable softmax over the last axis.

    `additive_mask` is a constant array broadcastable to x (use -inf to
    forbid positions); it does not receive gradients.
    """
    z = x.data
    if additive_mask is not None:
        z = z + additive_mask
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=-1, keepdims=True)

    def bw(g):
        if x.requires_grad:
            dot = (g * s).sum(axis=-1, keepdims=True)
            x._accumulate(s * (g - dot))

    return Tensor._make(s, (x,), bw)


_GELU_C = np.sqrt(2.0 / np.pi)


def gelu(x: Tensor) -> Tensor:
    """Gaussian error linear unit (tanh approximation).

    Smooth everywhere, which keeps finite-difference gradient checks clean.
    """
    d = x.data
    inner = _GELU_C * (d + 0.044715 * d ** 3)
    t = np.tanh(inner)
    out_data = 0.5 * d * (1.0 + t)

    def bw(g):
        if x.requires_grad:
            dinner = _GELU_C * (1.0 + 3 * 0.044715 * d ** 2)
            grad = 0.5 * (1.0 + t) + 0.5 * d * (1.0 - t ** 2) * dinner
            x._accumulate(g * grad)

    return Tensor._make(out_data, (x,), bw)


def backward(loss: Tensor):
    """Accumulate d(loss)/d(leaf) into the `.grad` of every reachable leaf.

    `loss` must be scalar. Iterative topological order, so graph depth is
    not limited by the Python recursion limit.
    """
    if loss.data.ndim != 0:
        raise ValueError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    if not loss.requires_grad:
        return

    topo = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))

    loss._accumulate(np.ones_like(loss.data))
    for node in reversed(topo):
        if node._backward is not None:
            node._backward(node.grad)


class ModelParams:
    """Flat named parameter store with gradient buffers.

    Parameters are created in a deterministic order from a seed; the order
    doubles as the checkpoint manifest order.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._rng = np.random.default_rng(seed)
        self._params: dict[str, Tensor] = {}

    def normal(self, name: str, shape, scale: float) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter {name!r}")
        t = Tensor(self._rng.normal(0.0, scale, size=shape), requires_grad=True)
        self._params[name] = t
        return t

    def zeros(self, name: str, shape) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter {name!r}")
        t = Tensor(np.zeros(shape), requires_grad=True)
        self._params[name] = t
        return t

    def ones(self, name: str, shape) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter {name!r}")
        t = Tensor(np.ones(shape), requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self):
        return list(self._params)

    def items(self):
        return self._params.items()

    def zero_grads(self):
        for t in self._params.values():
            t.grad[...] = 0.0

    def n_params(self) -> int:
        return sum(t.data.size for t in self._params.values())

    def check_finite(self, where: str = "parameters"):
        for name, t in self._params.items():
            if not np.all(np.isfinite(t.data)):
                raise NumericError(f"non-finite values in {where}: {name}")

    def flat(self) -> np.ndarray:
        return np.concatenate([t.data.ravel() for t in self._params.values()])

    def load_flat(self, vec: np.ndarray):
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != self.n_params():
            raise ValueError("flat vector size does not match parameter count")
        pos = 0
        for t in self._params.values():
            n = t.data.size
            t.data[...] = vec[pos:pos + n].reshape(t.data.shape)
            pos += n
