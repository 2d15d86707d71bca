"""Dense tensors with recorded-operation reverse-mode differentiation.

Every primitive records its parents and a reverse rule; ``backward`` walks the
recorded graph in reverse topological order. Precision is set per tensor
(float32 for training, float64 for verification). Operations are strictly
2-D-or-smaller and deterministic: same inputs, same bits.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np
from scipy.special import erf, expit

ArrayLike = Union[np.ndarray, float, int, Sequence]

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


class Tensor:
    """A numpy array plus the bookkeeping needed for reverse mode."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_reverse")

    def __init__(self, data: ArrayLike, requires_grad: bool = False, dtype=None):
        if dtype is None:
            # keep float ndarrays as-is; python data defaults to float32
            if isinstance(data, np.ndarray) and data.dtype.kind == "f":
                dtype = data.dtype
            else:
                dtype = np.float32
        self.data = np.asarray(data, dtype=dtype)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self._parents: tuple[Tensor, ...] = ()
        self._reverse: Optional[Callable[[np.ndarray], tuple]] = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    # operator sugar; constants wrap as non-differentiable tensors
    def __add__(self, other):
        return add(self, _wrap(other, self.dtype))

    def __radd__(self, other):
        return add(_wrap(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, _wrap(other, self.dtype))

    def __rmul__(self, other):
        return mul(_wrap(other, self.dtype), self)

    def __sub__(self, other):
        return add(self, scale(_wrap(other, self.dtype), -1.0))

    def __rsub__(self, other):
        return add(_wrap(other, self.dtype), scale(self, -1.0))

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def backward(self) -> None:
        backward(self)


def _wrap(value, dtype) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=dtype))


def from_op(data: np.ndarray, parents: Sequence[Tensor], reverse: Callable[[np.ndarray], tuple]) -> Tensor:
    """Create a tensor recorded as the output of a primitive.

    ``reverse`` maps the output adjoint to one adjoint (or None) per parent.
    The extension point for model-specific primitives and for test probes.
    ``data`` must already be an ndarray.
    """
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    needs_grad = False
    for p in parents:
        if p.requires_grad:
            needs_grad = True
            break
    out.requires_grad = needs_grad
    if needs_grad:
        out._parents = tuple(parents)
        out._reverse = reverse
    else:
        out._parents = ()
        out._reverse = None
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum an adjoint down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _topo_order(root: Tensor) -> list[Tensor]:
    """Reverse topological order of the recorded graph (iterative DFS)."""
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every reachable requires_grad tensor.

    Repeated calls accumulate; reset with ``zero_grad``.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward requires a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ValueError("loss does not depend on any requires_grad tensor")
    adjoint: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(_topo_order(loss)):
        out_grad = adjoint.pop(id(node), None)
        if out_grad is None:
            continue
        if node.requires_grad:
            node.grad = out_grad if node.grad is None else node.grad + out_grad
        if node._reverse is None:
            continue
        parent_grads = node._reverse(out_grad)
        for parent, pgrad in zip(node._parents, parent_grads):
            if pgrad is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in adjoint:
                adjoint[key] = adjoint[key] + pgrad
            else:
                adjoint[key] = pgrad


# --- primitives ---------------------------------------------------------------

def _check_2d(name: str, *tensors: Tensor) -> None:
    for t in tensors:
        if t.data.ndim != 2:
            raise ValueError(f"{name} expects 2-D operands, got shape {t.shape}")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    _check_2d("matmul", a, b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    data = a.data @ b.data

    def reverse(g):
        return g @ b.data.T, a.data.T @ g

    return from_op(data, (a, b), reverse)


def transpose(a: Tensor) -> Tensor:
    _check_2d("transpose", a)
    return from_op(np.ascontiguousarray(a.data.T), (a,), lambda g: (g.T,))


def add(a: Tensor, b: Tensor) -> Tensor:
    data = a.data + b.data

    def reverse(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return from_op(data, (a, b), reverse)


def mul(a: Tensor, b: Tensor) -> Tensor:
    data = a.data * b.data

    def reverse(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return from_op(data, (a, b), reverse)


def scale(a: Tensor, factor: float) -> Tensor:
    factor = float(factor)
    return from_op(a.data * np.asarray(factor, dtype=a.dtype), (a,), lambda g: (g * factor,))


def concat_lastdim(tensors: Sequence[Tensor]) -> Tensor:
    tensors = list(tensors)
    _check_2d("concat_lastdim", *tensors)
    widths = [t.shape[1] for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=1)
    offsets = np.cumsum([0] + widths)

    def reverse(g):
        return tuple(g[:, offsets[i]:offsets[i + 1]] for i in range(len(widths)))

    return from_op(data, tensors, reverse)


def concat_rows(tensors: Sequence[Tensor]) -> Tensor:
    tensors = list(tensors)
    _check_2d("concat_rows", *tensors)
    heights = [t.shape[0] for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=0)
    offsets = np.cumsum([0] + heights)

    def reverse(g):
        return tuple(g[offsets[i]:offsets[i + 1], :] for i in range(len(heights)))

    return from_op(data, tensors, reverse)


def slice_rows(a: Tensor, start: int, stop: int) -> Tensor:
    _check_2d("slice_rows", a)
    if not 0 <= start <= stop <= a.shape[0]:
        raise ValueError(f"slice_rows [{start}:{stop}] out of bounds for shape {a.shape}")
    data = a.data[start:stop].copy()

    def reverse(g):
        full = np.zeros_like(a.data)
        full[start:stop] = g
        return (full,)

    return from_op(data, (a,), reverse)


def mean_rows(a: Tensor) -> Tensor:
    """Mean over rows, keeping a (1, d) shape."""
    _check_2d("mean_rows", a)
    n = a.shape[0]
    if n == 0:
        raise ValueError("mean_rows of an empty tensor")
    data = a.data.mean(axis=0, keepdims=True)

    def reverse(g):
        return (np.broadcast_to(g / n, a.shape).copy(),)

    return from_op(data, (a,), reverse)


def sum_all(a: Tensor) -> Tensor:
    data = a.data.sum().reshape(1, 1)

    def reverse(g):
        return (np.broadcast_to(g.reshape(()), a.shape).copy(),)

    return from_op(data, (a,), reverse)


def log(a: Tensor) -> Tensor:
    return from_op(np.log(a.data), (a,), lambda g: (g / a.data,))


def sigmoid(a: Tensor) -> Tensor:
    y = expit(a.data)
    return from_op(y, (a,), lambda g: (g * y * (1.0 - y),))


def relu(a: Tensor) -> Tensor:
    y = np.maximum(a.data, 0.0)
    return from_op(y, (a,), lambda g: (g * (a.data > 0),))


def gelu(a: Tensor) -> Tensor:
    """Exact Gaussian-error-function form."""
    cdf = 0.5 * (1.0 + erf(a.data * _INV_SQRT2))
    y = a.data * cdf

    def reverse(g):
        pdf = np.exp(-0.5 * a.data * a.data) * _INV_SQRT2PI
        return (g * (cdf + a.data * pdf),)

    return from_op(y, (a,), reverse)


def softmax_lastdim(a: Tensor) -> Tensor:
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)

    def reverse(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    return from_op(y, (a,), reverse)


def scaled_dot_attention(
    q: Tensor, k: Tensor, v: Tensor, bias: Optional[np.ndarray] = None
) -> tuple[Tensor, np.ndarray]:
    """Fused softmax(q @ k.T / sqrt(d) + bias) @ v.

    Also returns the post-softmax weights as a plain array for tracing.
    """
    _check_2d("scaled_dot_attention", q, k, v)
    inv = 1.0 / math.sqrt(q.shape[1])
    logits = (q.data @ k.data.T) * inv
    if bias is not None:
        if bias.dtype != logits.dtype:
            bias = bias.astype(logits.dtype)
        logits = logits + bias
    logits -= logits.max(axis=-1, keepdims=True)
    e = np.exp(logits)
    weights = e / e.sum(axis=-1, keepdims=True)
    data = weights @ v.data

    def reverse(g):
        d_weights = g @ v.data.T
        d_logits = weights * (d_weights - (d_weights * weights).sum(axis=-1, keepdims=True))
        return (d_logits @ k.data) * inv, (d_logits.T @ q.data) * inv, weights.T @ g

    return from_op(data, (q, k, v), reverse), weights


def log_softmax_lastdim(a: Tensor) -> Tensor:
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    y = shifted - lse

    def reverse(g):
        soft = np.exp(y)
        return (g - soft * g.sum(axis=-1, keepdims=True),)

    return from_op(y, (a,), reverse)


def layer_norm_lastdim(a: Tensor, eps: float = 1e-5) -> Tensor:
    """Row-wise normalization to zero mean, unit variance; affine is applied outside."""
    mu = a.data.mean(axis=-1, keepdims=True)
    centered = a.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    y = centered * inv

    def reverse(g):
        g_mean = g.mean(axis=-1, keepdims=True)
        gy_mean = (g * y).mean(axis=-1, keepdims=True)
        return (inv * (g - g_mean - y * gy_mean),)

    return from_op(y, (a,), reverse)


def layer_norm_affine_lastdim(a: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Fused LN(a) * gain + bias with gain/bias of shape (1, d)."""
    mu = a.data.mean(axis=-1, keepdims=True)
    centered = a.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    normed = centered * inv
    data = normed * gain.data + bias.data

    def reverse(g):
        d_gain = (g * normed).sum(axis=0, keepdims=True)
        d_bias = g.sum(axis=0, keepdims=True)
        ge = g * gain.data
        g_mean = ge.mean(axis=-1, keepdims=True)
        gy_mean = (ge * normed).mean(axis=-1, keepdims=True)
        return inv * (ge - g_mean - normed * gy_mean), d_gain, d_bias

    return from_op(data, (a, gain, bias), reverse)


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Fused x @ w + b with b of shape (1, k)."""
    _check_2d("affine", x, w, b)
    data = x.data @ w.data + b.data

    def reverse(g):
        return g @ w.data.T, x.data.T @ g, g.sum(axis=0, keepdims=True)

    return from_op(data, (x, w, b), reverse)


def interval_means(x: Tensor, intervals: Sequence[tuple[int, int]]) -> Tensor:
    """Row k of the output is the mean of x's rows in the k-th interval."""
    _check_2d("interval_means", x)
    n = x.shape[0]
    for start, stop in intervals:
        if not 0 <= start < stop <= n:
            raise ValueError(f"empty or out-of-range interval [{start}:{stop}) for {n} rows")
    data = np.stack([x.data[s:e].mean(axis=0) for s, e in intervals])

    def reverse(g):
        full = np.zeros_like(x.data)
        for k, (s, e) in enumerate(intervals):
            full[s:e] += g[k] / (e - s)
        return (full,)

    return from_op(data, (x,), reverse)


def embedding_lookup(table: Tensor, ids: np.ndarray) -> Tensor:
    _check_2d("embedding_lookup", table)
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim != 1:
        raise ValueError(f"embedding_lookup expects a 1-D id array, got shape {ids.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ValueError(f"id out of range for table with {table.shape[0]} rows")
    data = table.data[ids].copy()

    def reverse(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids, g)
        return (full,)

    return from_op(data, (table,), reverse)


# --- gradient checking ----------------------------------------------------------

def grad_check(
    f: Callable[[], Tensor],
    params: Iterable[Tensor],
    step: float = 1e-5,
) -> float:
    """Max relative error between reverse-mode and central-difference gradients.

    ``f`` must be a deterministic closure over ``params`` returning a scalar.
    The relative error denominator is max(1, |analytic|, |numeric|).
    """
    params = list(params)
    for p in params:
        p.zero_grad()
    loss = f()
    loss.backward()
    worst = 0.0
    for p in params:
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        for idx in range(flat.size):
            original = flat[idx]
            flat[idx] = original + step
            hi = f().item()
            flat[idx] = original - step
            lo = f().item()
            flat[idx] = original
            numeric = (hi - lo) / (2.0 * step)
            ana = float(analytic.reshape(-1)[idx])
            err = abs(ana - numeric) / max(1.0, abs(ana), abs(numeric))
            if err > worst:
                worst = err
    return worst
