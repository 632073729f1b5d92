"""Minimal reverse-mode automatic differentiation on numpy arrays.

A Tensor wraps a float64 ndarray plus an optional tape node (the producing
operation's backward closure and its input tensors).  Graphs are built
dynamically by calling the op functions below and are backpropagated once
with backward().  The op set is exactly what the sequence models in this
package need; nothing speculative.

Broadcasting is deliberately restricted to one pattern: the second operand
of a binary op may be a row vector applied across the last axis of the
first operand.  That is the only pattern bias terms and per-position
offsets require, and it keeps every gradient rule auditable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ContractError,
    DimensionError,
    IndexRangeError,
    NumericError,
    OracleError,
    ParameterError,
)

Array = np.ndarray


class Tensor:
    """A float64 array participating in a dynamically built computation graph.

    data is immutable by convention once the tensor feeds an op (parameter
    updates happen between graph builds).  grad is allocated iff
    requires_grad and accumulates across backward() calls until explicitly
    zeroed.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        if isinstance(data, np.ndarray) and data.dtype == np.float64:
            self.data = data
        else:
            self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(self.data) if requires_grad else None
        self._parents: tuple = ()
        self._backward = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad[...] = 0.0

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # Light operator sugar; the named functions are the primary API.
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def _result(data: Array, parents: tuple, backward_fn) -> Tensor:
    """Wrap an op result, attaching the tape node if any input needs grads."""
    out = Tensor(data, requires_grad=any(p.requires_grad for p in parents))
    if out.requires_grad:
        out._parents = parents
        out._backward = backward_fn
    return out


class ParameterSet:
    """Ordered, uniquely named collection of trainable tensors."""

    def __init__(self):
        self._entries: dict[str, Tensor] = {}

    def add(self, name: str, data) -> Tensor:
        if name in self._entries:
            raise ContractError(f"duplicate parameter name {name!r}")
        t = data if isinstance(data, Tensor) else Tensor(data, requires_grad=True)
        if not t.requires_grad:
            raise ContractError(f"parameter {name!r} must require gradients")
        self._entries[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def names(self):
        return list(self._entries.keys())

    def items(self):
        return self._entries.items()

    def tensors(self):
        return self._entries.values()

    def zero_grad(self) -> None:
        for t in self._entries.values():
            t.zero_grad()

    def total_size(self) -> int:
        return sum(t.size for t in self._entries.values())


# ---------------------------------------------------------------------------
# core ops
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    va, vb = a.data, b.data
    if va.ndim != 2 or vb.ndim != 2 or va.shape[1] != vb.shape[0]:
        raise DimensionError(f"matmul: incompatible shapes {va.shape} x {vb.shape}")
    out = va @ vb

    def backward(g, acc):
        acc(a, g @ vb.T)
        acc(b, va.T @ g)

    return _result(out, (a, b), backward)


def _broadcast_kind(va: Array, vb: Array) -> str:
    if va.shape == vb.shape:
        return "same"
    # b as a row vector over a's last axis
    if vb.ndim == 1 and va.ndim >= 1 and va.shape[-1] == vb.shape[0]:
        return "row"
    if vb.ndim == 2 and vb.shape[0] == 1 and va.ndim == 2 and va.shape[1] == vb.shape[1]:
        return "row"
    raise DimensionError(f"binary op: shapes {va.shape} and {vb.shape} are not compatible")


def _reduce_to(g: Array, shape: tuple) -> Array:
    """Sum g over the axes that were broadcast to reach its shape."""
    if g.shape == shape:
        return g
    reduced = g.reshape(-1, g.shape[-1]).sum(axis=0)
    return reduced.reshape(shape)


def add(a: Tensor, b: Tensor) -> Tensor:
    kind = _broadcast_kind(a.data, b.data)
    out = a.data + b.data

    if kind == "same":
        def backward(g, acc):
            acc(a, g)
            acc(b, g)
    else:
        def backward(g, acc):
            acc(a, g)
            acc(b, _reduce_to(g, b.data.shape))

    return _result(out, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    kind = _broadcast_kind(a.data, b.data)
    out = a.data - b.data

    if kind == "same":
        def backward(g, acc):
            acc(a, g)
            acc(b, -g)
    else:
        def backward(g, acc):
            acc(a, g)
            acc(b, -_reduce_to(g, b.data.shape))

    return _result(out, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    kind = _broadcast_kind(a.data, b.data)
    va, vb = a.data, b.data
    out = va * vb

    if kind == "same":
        def backward(g, acc):
            acc(a, g * vb)
            acc(b, g * va)
    else:
        def backward(g, acc):
            acc(a, g * vb)
            acc(b, _reduce_to(g * va, vb.shape))

    return _result(out, (a, b), backward)


_BINARY = {"add": add, "sub": sub, "mul": mul}


def map_binary(a: Tensor, b: Tensor, f: str) -> Tensor:
    try:
        return _BINARY[f](a, b)
    except KeyError:
        raise ParameterError(f"map_binary: unknown function {f!r}") from None


def scale(x: Tensor, c: float) -> Tensor:
    """Multiply by a Python scalar constant."""
    c = float(c)
    out = x.data * c

    def backward(g, acc):
        acc(x, g * c)

    return _result(out, (x,), backward)


# ---------------------------------------------------------------------------
# elementwise nonlinearities
# ---------------------------------------------------------------------------

def sigmoid(x: Tensor) -> Tensor:
    v = x.data
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ex = np.exp(v[~pos])
    out[~pos] = ex / (1.0 + ex)

    def backward(g, acc):
        acc(x, g * out * (1.0 - out))

    return _result(out, (x,), backward)


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)

    def backward(g, acc):
        acc(x, g * (1.0 - out * out))

    return _result(out, (x,), backward)


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)

    def backward(g, acc):
        acc(x, g * out)

    return _result(out, (x,), backward)


def log1p(x: Tensor) -> Tensor:
    v = x.data
    if np.any(v <= -1.0):
        raise NumericError("log1p: all elements must be > -1")
    out = np.log1p(v)

    def backward(g, acc):
        acc(x, g / (1.0 + v))

    return _result(out, (x,), backward)


def relu(x: Tensor) -> Tensor:
    v = x.data
    out = np.maximum(v, 0.0)
    mask = v > 0  # subgradient 0 at the kink

    def backward(g, acc):
        acc(x, g * mask)

    return _result(out, (x,), backward)


_UNARY = {"sigmoid": sigmoid, "tanh": tanh, "exp": exp, "log1p": log1p, "relu": relu}


def map_unary(x: Tensor, f: str) -> Tensor:
    try:
        return _UNARY[f](x)
    except KeyError:
        raise ParameterError(f"map_unary: unknown function {f!r}") from None


def softmax_rows(x: Tensor) -> Tensor:
    """Row-wise softmax with max-subtraction for stability."""
    v = x.data
    if not np.all(np.isfinite(v)):
        raise NumericError("softmax_rows: input contains NaN or Inf")
    shifted = v - v.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def backward(g, acc):
        dot = (g * out).sum(axis=-1, keepdims=True)
        acc(x, out * (g - dot))

    return _result(out, (x,), backward)


# ---------------------------------------------------------------------------
# structural ops
# ---------------------------------------------------------------------------

def concat_last(a: Tensor, b: Tensor) -> Tensor:
    va, vb = a.data, b.data
    if va.ndim != vb.ndim or va.shape[:-1] != vb.shape[:-1]:
        raise DimensionError(f"concat_last: shapes {va.shape} and {vb.shape} differ off the last axis")
    out = np.concatenate([va, vb], axis=-1)
    na = va.shape[-1]

    def backward(g, acc):
        acc(a, g[..., :na])
        acc(b, g[..., na:])

    return _result(out, (a, b), backward)


def slice_last(x: Tensor, start: int, stop: int) -> Tensor:
    v = x.data
    if not (0 <= start <= stop <= v.shape[-1]):
        raise DimensionError(f"slice_last: [{start}:{stop}] out of range for last axis {v.shape[-1]}")
    out = v[..., start:stop]

    def backward(g, acc):
        full = np.zeros_like(v)
        full[..., start:stop] = g
        acc(x, full)

    return _result(out, (x,), backward)


def stack_rows(tensors) -> Tensor:
    """Concatenate 2-D tensors along axis 0."""
    tensors = tuple(tensors)
    if not tensors:
        raise ContractError("stack_rows: need at least one tensor")
    cols = tensors[0].data.shape[-1]
    for t in tensors:
        if t.data.ndim != 2 or t.data.shape[1] != cols:
            raise DimensionError("stack_rows: all tensors must be 2-D with equal column count")
    out = np.concatenate([t.data for t in tensors], axis=0)
    counts = [t.data.shape[0] for t in tensors]

    def backward(g, acc):
        at = 0
        for t, n in zip(tensors, counts):
            acc(t, g[at:at + n])
            at += n

    return _result(out, tensors, backward)


def slice_rows(x: Tensor, start: int, stop: int) -> Tensor:
    v = x.data
    if v.ndim != 2 or not (0 <= start <= stop <= v.shape[0]):
        raise DimensionError(f"slice_rows: [{start}:{stop}] out of range for shape {v.shape}")
    out = v[start:stop]

    def backward(g, acc):
        full = np.zeros_like(v)
        full[start:stop] = g
        acc(x, full)

    return _result(out, (x,), backward)


def reverse_rows(x: Tensor) -> Tensor:
    if x.data.ndim != 2:
        raise DimensionError("reverse_rows: expects a 2-D tensor")
    out = x.data[::-1]

    def backward(g, acc):
        acc(x, g[::-1])

    return _result(out, (x,), backward)


def transpose(x: Tensor) -> Tensor:
    if x.data.ndim != 2:
        raise DimensionError("transpose: expects a 2-D tensor")
    out = x.data.T

    def backward(g, acc):
        acc(x, g.T)

    return _result(out, (x,), backward)


def reshape(x: Tensor, shape) -> Tensor:
    orig = x.data.shape
    out = x.data.reshape(shape)

    def backward(g, acc):
        acc(x, g.reshape(orig))

    return _result(out, (x,), backward)


def sum_all(x: Tensor) -> Tensor:
    out = np.asarray(x.data.sum())

    def backward(g, acc):
        acc(x, np.full(x.data.shape, float(g)))

    return _result(out, (x,), backward)


# ---------------------------------------------------------------------------
# layers that are single taped ops
# ---------------------------------------------------------------------------

def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize each row to zero mean / unit population variance, then affine."""
    if eps <= 0:
        raise ParameterError("layer_norm: eps must be > 0")
    v = x.data
    d = v.shape[-1]
    if gain.data.shape != (d,) or bias.data.shape != (d,):
        raise DimensionError(f"layer_norm: gain/bias must have shape ({d},)")
    mu = v.mean(axis=-1, keepdims=True)
    xc = v - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gain.data + bias.data

    def backward(g, acc):
        flat_g = g.reshape(-1, d)
        flat_xhat = xhat.reshape(-1, d)
        acc(gain, (flat_g * flat_xhat).sum(axis=0))
        acc(bias, flat_g.sum(axis=0))
        dxhat = g * gain.data
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        acc(x, (dxhat - m1 - xhat * m2) * inv)

    return _result(out, (x, gain, bias), backward)


def dropout(x: Tensor, rate: float, training: bool, rng: np.random.Generator) -> Tensor:
    if not (0.0 <= rate < 1.0):
        raise ParameterError(f"dropout: rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    keep = rng.random(x.data.shape) >= rate
    factor = 1.0 / (1.0 - rate)
    mask = keep * factor
    out = x.data * mask

    def backward(g, acc):
        acc(x, g * mask)

    return _result(out, (x,), backward)


def embedding_lookup(table: Tensor, ids) -> Tensor:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim != 1:
        raise DimensionError("embedding_lookup: ids must be a 1-D integer sequence")
    v = table.data
    if ids.size:
        bad = (ids < 0) | (ids >= v.shape[0])
        if np.any(bad):
            raise IndexRangeError(
                f"embedding_lookup: id {int(ids[bad][0])} out of range [0, {v.shape[0]})")
    out = v[ids] if ids.size else np.zeros((0, v.shape[1]))

    def backward(g, acc):
        full = np.zeros_like(v)
        np.add.at(full, ids, g)
        acc(table, full)

    return _result(out, (table,), backward)


# ---------------------------------------------------------------------------
# backward pass
# ---------------------------------------------------------------------------

def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
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


def backward(loss: Tensor) -> None:
    """Accumulate d loss / d t into t.grad for every tensor reaching loss.

    loss must be scalar.  Grad buffers are not zeroed here, so repeated
    calls accumulate; each call contributes exactly one unit of gradient
    (per-call flows are tracked separately from the persistent buffers).
    """
    if loss.data.size != 1:
        raise ContractError(f"backward: loss must be scalar, got shape {loss.data.shape}")
    if not loss.requires_grad:
        return
    order = _topo_order(loss)
    flows: dict[int, Array] = {id(loss): np.ones_like(loss.data)}

    def acc(t: Tensor, delta: Array) -> None:
        if t.requires_grad:
            key = id(t)
            cur = flows.get(key)
            flows[key] = delta if cur is None else cur + delta

    for node in reversed(order):
        g = flows.pop(id(node), None)
        if g is None:
            continue
        if node.grad is not None:
            node.grad += g
        if node._backward is not None:
            node._backward(g, acc)


# ---------------------------------------------------------------------------
# finite-difference gradient oracle
# ---------------------------------------------------------------------------

@dataclass
class GradCheckEntry:
    name: str
    max_rel_err: float
    passed: bool


@dataclass
class GradCheckReport:
    entries: list[GradCheckEntry]
    tol: float

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    @property
    def max_rel_err(self) -> float:
        return max((e.max_rel_err for e in self.entries), default=0.0)

    def render(self) -> str:
        return "\n".join(
            f"{e.name} {e.max_rel_err:.3e} {'pass' if e.passed else 'fail'}"
            for e in self.entries)


def grad_check(f, params: ParameterSet, h: float = 1e-5, tol: float = 1e-4) -> GradCheckReport:
    """Compare backward() gradients of the scalar function f against central
    finite differences, one parameter element at a time.

    The relative error per element is |analytic - numeric| divided by
    max(|analytic|, |numeric|, 1), so tiny gradients are compared absolutely.
    f must be deterministic; two baseline evaluations are compared bit for
    bit to detect stochastic ops left enabled.
    """
    if h <= 0:
        raise ParameterError("grad_check: h must be > 0")
    base1 = float(f().data)
    base2 = float(f().data)
    if base1 != base2:
        raise OracleError("grad_check: f is not deterministic (two evaluations differ)")

    params.zero_grad()
    backward(f())
    analytic = {name: t.grad.copy() for name, t in params.items()}

    entries = []
    for name, t in params.items():
        flat = t.data.reshape(-1)
        a_flat = analytic[name].reshape(-1)
        worst = 0.0
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = float(f().data)
            flat[i] = orig - h
            fm = float(f().data)
            flat[i] = orig
            numeric = (fp - fm) / (2.0 * h)
            denom = max(abs(a_flat[i]), abs(numeric), 1.0)
            worst = max(worst, abs(a_flat[i] - numeric) / denom)
        entries.append(GradCheckEntry(name, worst, worst <= tol))
    return GradCheckReport(entries, tol)
