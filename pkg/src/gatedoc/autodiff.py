"""Dense-tensor engine with reverse-mode automatic differentiation.

Covers exactly what the gated document classifier needs: 2-D matrix
products, elementwise arithmetic with scalar and one-row broadcasting,
sigmoid/tanh/relu, row gather and axis slicing, concat/split, softmax,
row-wise layer normalisation, per-row scaling (the gate application),
binary cross-entropy, a central-finite-difference gradient checker and
an Adam optimizer.

Graphs are built eagerly: every operation whose inputs require
gradients records a `Node` holding the op kind, its input tensors and a
backward closure with whatever activations the derivative needs.
`backward` walks the reachable nodes once, in reverse creation order
(creation order is topological by construction).  There is no global
mutable state beyond the node-id counter, so independent graphs can be
built concurrently.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, GradCheckError, TrainingError, UsageError

_node_ids = itertools.count()

_PROB_CLAMP = 1e-7  # bce_loss clamps probabilities into [1e-7, 1 - 1e-7]


class Node:
    """One recorded operation: op kind, inputs, and the backward rule."""

    __slots__ = ("op", "inputs", "backward_fn", "out_id")

    def __init__(self, op, inputs, backward_fn):
        self.op = op
        self.inputs = inputs
        self.backward_fn = backward_fn
        self.out_id = None


class Tensor:
    """A dense array participating in a reverse-mode differentiation graph.

    `data` is never mutated by operations; optimizers replace it
    between graph builds.  `grad` accumulates across backward calls
    until `zero_grad` clears it, which is what batch-level gradient
    accumulation relies on.
    """

    __slots__ = ("data", "requires_grad", "grad", "name", "node", "node_id")

    def __init__(self, data, requires_grad=False, name=None, _node=None):
        arr = np.asarray(data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad = None
        self.name = name
        self.node = _node
        self.node_id = next(_node_ids)
        if _node is not None:
            _node.out_id = self.node_id

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self):
        if self.data.size != 1:
            raise UsageError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self):
        """A constant copy outside any graph."""
        return Tensor(self.data.copy(), requires_grad=False)

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, grad={self.requires_grad}{tag})"


def parameter(name, data):
    """A named trainable leaf."""
    return Tensor(data, requires_grad=True, name=name)


def constant(data, dtype=None):
    arr = np.asarray(data, dtype=dtype)
    return Tensor(arr, requires_grad=False)


def _const_like(t, value):
    return Tensor(np.full((1, 1), value, dtype=t.data.dtype))


def _make(op, out_data, inputs, backward_fn):
    if any(t.requires_grad for t in inputs):
        return Tensor(out_data, requires_grad=True, _node=Node(op, inputs, backward_fn))
    return Tensor(out_data)


@dataclass
class Graph:
    """Reachable operation nodes of one output, in creation order."""

    nodes: list

    @classmethod
    def trace(cls, output):
        seen = set()
        ops = []
        stack = [output]
        while stack:
            t = stack.pop()
            if id(t) in seen or t.node is None:
                continue
            seen.add(id(t))
            ops.append(t)
            stack.extend(t.node.inputs)
        ops.sort(key=lambda t: t.node_id)
        return cls(nodes=ops)


def backward(loss):
    """Accumulate gradients of a scalar `loss` into every requires_grad leaf.

    Returns a map from leaf name to its (accumulated) gradient array for
    the named leaves this pass reached.
    """
    if loss.data.size != 1:
        raise UsageError(f"backward requires a scalar loss, got shape {loss.shape}")
    touched = {}
    if loss.node is None:
        if loss.requires_grad:
            g = np.ones_like(loss.data)
            loss.grad = g if loss.grad is None else loss.grad + g
            if loss.name:
                touched[loss.name] = loss.grad
        return touched

    graph = Graph.trace(loss)
    grads = {id(loss): np.ones_like(loss.data)}
    for t in reversed(graph.nodes):
        g = grads.pop(id(t), None)
        if g is None:
            continue
        in_grads = t.node.backward_fn(g)
        for inp, ig in zip(t.node.inputs, in_grads):
            if ig is None or not inp.requires_grad:
                continue
            if inp.node is None:
                inp.grad = ig if inp.grad is None else inp.grad + ig
                if inp.name:
                    touched[inp.name] = inp.grad
            else:
                key = id(inp)
                grads[key] = ig if key not in grads else grads[key] + ig
    return touched


def zero_grad(params):
    for t in params:
        t.grad = None


# ---------------------------------------------------------------------------
# elementary operations
# ---------------------------------------------------------------------------


def matmul(a, b):
    """Standard 2-D matrix product."""
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    out = a.data @ b.data

    def bw(g):
        return (
            g @ b.data.T if a.requires_grad else None,
            a.data.T @ g if b.requires_grad else None,
        )

    return _make("matmul", out, (a, b), bw)


def _broadcast_ok(sa, sb):
    if sa == sb:
        return True
    if _is_scalar_shape(sa) or _is_scalar_shape(sb):
        return True
    return _is_row_broadcast(sa, sb) or _is_row_broadcast(sb, sa)


def _is_scalar_shape(s):
    return int(np.prod(s, dtype=np.int64)) == 1


def _is_row_broadcast(row, full):
    # (d,) or (1, d) against (n, d): trailing-dimension alignment
    if len(full) != 2:
        return False
    d = full[1]
    return row == (d,) or row == (1, d)


def _reduce_to(g, shape):
    """Sum gradient over the axes an operand was broadcast along."""
    if g.shape == shape:
        return g
    if _is_scalar_shape(shape):
        return g.sum().reshape(shape)
    return g.sum(axis=0).reshape(shape)


def elementwise(kind, a, b):
    """Pointwise add/sub/mul with scalar or one-row broadcasting."""
    if kind not in ("add", "sub", "mul"):
        raise UsageError(f"unknown elementwise kind {kind!r}")
    if not _broadcast_ok(a.shape, b.shape):
        raise DimensionError(f"{kind}: incompatible shapes {a.shape} and {b.shape}")
    if kind == "add":
        out = a.data + b.data

        def bw(g):
            return (
                _reduce_to(g, a.shape) if a.requires_grad else None,
                _reduce_to(g, b.shape) if b.requires_grad else None,
            )

    elif kind == "sub":
        out = a.data - b.data

        def bw(g):
            return (
                _reduce_to(g, a.shape) if a.requires_grad else None,
                _reduce_to(-g, b.shape) if b.requires_grad else None,
            )

    else:
        out = a.data * b.data
        ad, bd = a.data, b.data

        def bw(g):
            return (
                _reduce_to(g * bd, a.shape) if a.requires_grad else None,
                _reduce_to(g * ad, b.shape) if b.requires_grad else None,
            )

    return _make(kind, out, (a, b), bw)


def add(a, b):
    return elementwise("add", a, b)


def sub(a, b):
    return elementwise("sub", a, b)


def mul(a, b):
    return elementwise("mul", a, b)


def scale(x, c):
    """Multiply by a python float, preserving dtype."""
    return mul(x, _const_like(x, c))


def _sigmoid(x):
    # branch on sign: never exponentiates a positive argument
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def activation(kind, x):
    """Pointwise sigmoid / tanh / relu."""
    if kind == "sigmoid":
        out = _sigmoid(x.data)

        def bw(g, y=out):
            return (g * y * (1.0 - y),)

    elif kind == "tanh":
        out = np.tanh(x.data)

        def bw(g, y=out):
            return (g * (1.0 - y * y),)

    elif kind == "relu":
        out = np.maximum(x.data, 0)
        mask = x.data > 0

        def bw(g):
            return (g * mask,)

    else:
        raise UsageError(f"unknown activation kind {kind!r}")
    return _make(kind, out, (x,), bw)


def sigmoid(x):
    return activation("sigmoid", x)


def tanh(x):
    return activation("tanh", x)


def relu(x):
    return activation("relu", x)


def concat(a, b, axis=0):
    """Concatenate two tensors; backward splits at the recorded boundary."""
    if a.data.ndim != b.data.ndim:
        raise DimensionError(f"concat: rank mismatch {a.shape} vs {b.shape}")
    if not 0 <= axis < a.data.ndim:
        raise DimensionError(f"concat: axis {axis} out of range for shape {a.shape}")
    for ax in range(a.data.ndim):
        if ax != axis and a.shape[ax] != b.shape[ax]:
            raise DimensionError(f"concat: incompatible shapes {a.shape} and {b.shape}")
    out = np.concatenate([a.data, b.data], axis=axis)
    k = a.shape[axis]

    def bw(g):
        sl_a = tuple(slice(None) if ax != axis else slice(0, k) for ax in range(g.ndim))
        sl_b = tuple(slice(None) if ax != axis else slice(k, None) for ax in range(g.ndim))
        return (
            g[sl_a] if a.requires_grad else None,
            g[sl_b] if b.requires_grad else None,
        )

    return _make("concat", out, (a, b), bw)


def concat_all(tensors, axis=0):
    out = tensors[0]
    for t in tensors[1:]:
        out = concat(out, t, axis=axis)
    return out


def slice_axis(x, axis, start, stop):
    """Contiguous slice along one axis; backward scatters into a zero array."""
    if not 0 <= axis < x.data.ndim:
        raise DimensionError(f"slice: axis {axis} out of range for shape {x.shape}")
    if not 0 <= start < stop <= x.shape[axis]:
        raise DimensionError(f"slice: range [{start}, {stop}) invalid for shape {x.shape}")
    sl = tuple(slice(None) if ax != axis else slice(start, stop) for ax in range(x.data.ndim))
    out = x.data[sl].copy()

    def bw(g):
        full = np.zeros_like(x.data)
        full[sl] = g
        return (full,)

    return _make("slice", out, (x,), bw)


def split(x, axis, k):
    """Inverse of concat: the first k entries along `axis` and the rest."""
    return slice_axis(x, axis, 0, k), slice_axis(x, axis, k, x.shape[axis])


def gather_rows(x, indices):
    """Rows of a 2-D tensor at `indices`; backward scatter-adds (repeats sum)."""
    if x.data.ndim != 2:
        raise DimensionError(f"gather_rows needs a 2-D tensor, got shape {x.shape}")
    idx = np.asarray(indices, dtype=np.intp)
    if idx.ndim != 1:
        raise DimensionError("gather_rows indices must be a flat sequence")
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[0]):
        raise DimensionError(f"gather_rows: index out of range for {x.shape[0]} rows")
    out = x.data[idx]

    def bw(g):
        full = np.zeros_like(x.data)
        np.add.at(full, idx, g)
        return (full,)

    return _make("gather", out, (x,), bw)


def transpose(x):
    if x.data.ndim != 2:
        raise DimensionError(f"transpose needs a 2-D tensor, got shape {x.shape}")
    out = x.data.T.copy()

    def bw(g):
        return (g.T,)

    return _make("transpose", out, (x,), bw)


def softmax(x, axis):
    """Exp-normalisation with max subtraction; sums to 1 along `axis`."""
    if x.data.ndim not in (1, 2):
        raise DimensionError(f"softmax supports 1-D/2-D tensors, got shape {x.shape}")
    ax = axis if axis >= 0 else x.data.ndim + axis
    if not 0 <= ax < x.data.ndim:
        raise DimensionError(f"softmax: axis {axis} out of range for shape {x.shape}")
    shifted = x.data - x.data.max(axis=ax, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=ax, keepdims=True)

    def bw(g, y=out):
        return (y * (g - (g * y).sum(axis=ax, keepdims=True)),)

    return _make("softmax", out, (x,), bw)


def scale_rows(x, s):
    """Scale row i of a 2-D tensor by the scalar s[i] (the gate application)."""
    if x.data.ndim != 2:
        raise DimensionError(f"scale_rows needs a 2-D tensor, got shape {x.shape}")
    n = x.shape[0]
    if s.shape not in ((n,), (n, 1)):
        raise DimensionError(f"scale_rows: scale shape {s.shape} does not match {n} rows")
    col = s.data.reshape(n, 1)
    out = x.data * col

    def bw(g):
        gx = g * col if x.requires_grad else None
        gs = (g * x.data).sum(axis=1).reshape(s.shape) if s.requires_grad else None
        return (gx, gs)

    return _make("scale_rows", out, (x, s), bw)


def layer_norm(x, gain, bias, eps=1e-5):
    """Row-wise layer normalisation of a 2-D tensor."""
    if x.data.ndim != 2:
        raise DimensionError(f"layer_norm needs a 2-D tensor, got shape {x.shape}")
    d = x.shape[1]
    if not _is_row_broadcast(gain.shape, x.shape) or not _is_row_broadcast(bias.shape, x.shape):
        raise DimensionError(
            f"layer_norm: gain {gain.shape} / bias {bias.shape} do not fit width {d}"
        )
    mu = x.data.mean(axis=1, keepdims=True)
    var = x.data.var(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    gflat = gain.data.reshape(1, d)
    out = xhat * gflat + bias.data.reshape(1, d)

    def bw(g):
        dxhat = g * gflat
        dx = None
        if x.requires_grad:
            dx = inv * (
                dxhat
                - dxhat.mean(axis=1, keepdims=True)
                - xhat * (dxhat * xhat).mean(axis=1, keepdims=True)
            )
        dgain = (g * xhat).sum(axis=0).reshape(gain.shape) if gain.requires_grad else None
        dbias = g.sum(axis=0).reshape(bias.shape) if bias.requires_grad else None
        return (dx, dgain, dbias)

    return _make("layer_norm", out, (x, gain, bias), bw)


def sum_all(x):
    """Sum of all entries, as a 1x1 tensor."""
    out = np.full((1, 1), x.data.sum(), dtype=x.data.dtype)

    def bw(g):
        return (np.full_like(x.data, g.reshape(())),)

    return _make("sum", out, (x,), bw)


def mean_all(x):
    out = np.full((1, 1), x.data.mean(), dtype=x.data.dtype)
    inv_n = 1.0 / x.data.size

    def bw(g):
        return (np.full_like(x.data, g.reshape(()) * inv_n),)

    return _make("mean", out, (x,), bw)


def bce_loss(probs, target):
    """Mean binary cross-entropy of per-class probabilities vs a one-hot target.

    Probabilities are clamped into [1e-7, 1 - 1e-7] before the log;
    gradients vanish on the clamped region.
    """
    if probs.data.shape != target.data.shape:
        raise DimensionError(
            f"bce_loss: probs shape {probs.shape} != target shape {target.shape}"
        )
    lo, hi = _PROB_CLAMP, 1.0 - _PROB_CLAMP
    p = np.clip(probs.data, lo, hi)
    t = target.data
    per = -(t * np.log(p) + (1.0 - t) * np.log1p(-p))
    c = probs.data.size
    out = np.full((1, 1), per.sum() / c, dtype=probs.data.dtype)
    inside = (probs.data > lo) & (probs.data < hi)

    def bw(g):
        s = g.reshape(()) / c
        dp = None
        if probs.requires_grad:
            dp = s * inside * (-t / p + (1.0 - t) / (1.0 - p))
        dt = None
        if target.requires_grad:
            dt = s * (np.log1p(-p) - np.log(p))
        return (dp, dt)

    return _make("bce", out, (probs, target), bw)


# ---------------------------------------------------------------------------
# verification and optimization
# ---------------------------------------------------------------------------


def grad_check(f, params, eps=1e-6):
    """Worst relative error between analytic and central-difference gradients.

    `f` is a closure that rebuilds the computation from the current
    contents of `params` (a sequence of leaf tensors) and returns a
    scalar tensor.  Relative error uses max(|analytic|, |numeric|, 1e-8)
    as the denominator.  Run in 64-bit.
    """
    params = list(params)
    zero_grad(params)
    loss = f()
    if not np.isfinite(loss.data).all():
        raise GradCheckError("non-finite loss at the evaluation point")
    backward(loss)
    analytic = [
        p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params
    ]
    worst = 0.0
    for p, ana in zip(params, analytic):
        p.data = np.ascontiguousarray(p.data)  # reshape below must be a view
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            fp = float(f().data.reshape(()))
            flat[i] = orig - eps
            fm = float(f().data.reshape(()))
            flat[i] = orig
            if not (math.isfinite(fp) and math.isfinite(fm)):
                raise GradCheckError(
                    f"non-finite value while perturbing {p.name or 'parameter'}[{i}]"
                )
            num = (fp - fm) / (2.0 * eps)
            a = float(ana.reshape(-1)[i])
            rel = abs(a - num) / max(abs(a), abs(num), 1e-8)
            if rel > worst:
                worst = rel
    zero_grad(params)
    return worst


@dataclass
class OptimizerState:
    """Adam moments and step counter for a set of named parameters."""

    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, grads, state):
    """One Adam update over `params` (name -> Tensor) with `grads` (name -> array).

    Deterministic given inputs; raises TrainingError on a non-finite
    gradient, naming the parameter.
    """
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**t
    bc2 = 1.0 - b2**t
    for name, p in params.items():
        if name not in grads:
            continue
        g = grads[name]
        if not np.isfinite(g).all():
            raise TrainingError(f"non-finite gradient for parameter {name!r}")
        m = state.m.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        state.m[name] = m
        state.v[name] = v
        p.data = p.data - state.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state


def xavier_uniform(rng, rows, cols, dtype):
    """Uniform init in +-sqrt(6 / (fan_in + fan_out))."""
    limit = math.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols)).astype(dtype)
