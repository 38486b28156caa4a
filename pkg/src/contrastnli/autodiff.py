"""Dense float64 tensors with reverse-mode automatic differentiation.

Tensors are scalars, vectors or matrices backed by numpy arrays. Every
operation records its inputs on the output tensor, so a forward pass
builds a fresh define-by-run graph; ``backward`` walks that graph once
in reverse topological order and accumulates gradients into each tensor
that requires them.

Backward rules are looked up by operation id in the ``BACKWARD``
registry rather than captured in closures. This keeps the graph a plain
record of (operation id, parent tensors, saved activations) and lets a
rule be swapped out, which the gradient checker's negative control uses.

All ops are deterministic: identical inputs give bit-identical outputs.
"""
from __future__ import annotations

from contextlib import contextmanager
from typing import Callable, Iterable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Operand shapes are incompatible with the requested operation."""


class NumericError(ArithmeticError):
    """Numerically invalid input: NaN where finite values are required,
    or a zero norm where a direction is needed."""


class Tensor:
    """Value plus (lazily populated) gradient, and its graph record."""

    __slots__ = ("data", "grad", "requires_grad", "op", "parents", "saved",
                 "_backward_done")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        if self.data.ndim > 2:
            raise ShapeError(f"tensors are at most 2-D, got shape {self.data.shape}")
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.op: str | None = None
        self.parents: tuple[Tensor, ...] = ()
        self.saved = None
        self._backward_done = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"


def parameter(data) -> Tensor:
    """A leaf tensor that collects gradients."""
    return Tensor(data, requires_grad=True)


def constant(data) -> Tensor:
    """A leaf tensor outside the differentiation graph."""
    return Tensor(data)


_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph recording inside the block (values are unchanged)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


# Registry of backward rules: op id -> fn(out_tensor, grad_out) -> per-parent grads.
BACKWARD: dict[str, Callable[[Tensor, np.ndarray], tuple]] = {}


def _make(data: np.ndarray, op: str, parents: Sequence[Tensor], saved=None) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.op = op
        out.parents = tuple(parents)
        out.saved = saved
    return out


def _check_same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"{op}: operand shapes {a.data.shape} and {b.data.shape} differ")


# ---------------------------------------------------------------------------
# elementwise ops
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "add")
    return _make(a.data + b.data, "add", (a, b))

BACKWARD["add"] = lambda t, g: (g, g)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "sub")
    return _make(a.data - b.data, "sub", (a, b))

BACKWARD["sub"] = lambda t, g: (g, -g)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "mul")
    return _make(a.data * b.data, "mul", (a, b))

BACKWARD["mul"] = lambda t, g: (g * t.parents[1].data, g * t.parents[0].data)


def div(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "div")
    return _make(a.data / b.data, "div", (a, b))

BACKWARD["div"] = lambda t, g: (
    g / t.parents[1].data,
    -g * t.parents[0].data / (t.parents[1].data ** 2),
)


def scale(x: Tensor, c: float) -> Tensor:
    return _make(x.data * c, "scale", (x,), saved=c)

BACKWARD["scale"] = lambda t, g: (g * t.saved,)


def relu(x: Tensor) -> Tensor:
    return _make(np.maximum(x.data, 0.0), "relu", (x,))

# Subgradient at exactly 0 is 0 (strict > keeps that).
BACKWARD["relu"] = lambda t, g: (g * (t.parents[0].data > 0.0),)


def tanh(x: Tensor) -> Tensor:
    return _make(np.tanh(x.data), "tanh", (x,))

BACKWARD["tanh"] = lambda t, g: (g * (1.0 - t.data ** 2),)


def exp(x: Tensor) -> Tensor:
    return _make(np.exp(x.data), "exp", (x,))

BACKWARD["exp"] = lambda t, g: (g * t.data,)


def log(x: Tensor) -> Tensor:
    return _make(np.log(x.data), "log", (x,))

BACKWARD["log"] = lambda t, g: (g / t.parents[0].data,)


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    """Add a length-k bias vector to every row of an m-by-k matrix."""
    if x.ndim != 2 or b.ndim != 1 or x.shape[1] != b.shape[0]:
        raise ShapeError(f"add_bias: matrix {x.data.shape} and bias {b.data.shape} do not align")
    return _make(x.data + b.data, "add_bias", (x, b))

BACKWARD["add_bias"] = lambda t, g: (g, g.sum(axis=0))


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul: expects matrices, got {a.data.shape} and {b.data.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions of {a.data.shape} and {b.data.shape} disagree")
    return _make(a.data @ b.data, "matmul", (a, b))

BACKWARD["matmul"] = lambda t, g: (
    g @ t.parents[1].data.T,
    t.parents[0].data.T @ g,
)


def transpose(x: Tensor) -> Tensor:
    if x.ndim != 2:
        raise ShapeError(f"transpose: expects a matrix, got {x.data.shape}")
    return _make(x.data.T, "transpose", (x,))

BACKWARD["transpose"] = lambda t, g: (g.T,)


# ---------------------------------------------------------------------------
# row-wise reductions and normalizations
# ---------------------------------------------------------------------------

def softmax_rows(x: Tensor) -> Tensor:
    """Row-wise softmax with max-subtraction for stability."""
    if x.ndim != 2:
        raise ShapeError(f"softmax_rows: expects a matrix, got {x.data.shape}")
    if np.isnan(x.data).any():
        raise NumericError("softmax_rows: NaN in input")
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)
    return _make(y, "softmax_rows", (x,))

def _softmax_rows_bwd(t, g):
    y = t.data
    return (y * (g - (g * y).sum(axis=1, keepdims=True)),)

BACKWARD["softmax_rows"] = _softmax_rows_bwd


def log_softmax_rows(x: Tensor) -> Tensor:
    """Row-wise log-softmax via the log-sum-exp trick."""
    if x.ndim != 2:
        raise ShapeError(f"log_softmax_rows: expects a matrix, got {x.data.shape}")
    if np.isnan(x.data).any():
        raise NumericError("log_softmax_rows: NaN in input")
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    y = shifted - lse
    return _make(y, "log_softmax_rows", (x,))

def _log_softmax_rows_bwd(t, g):
    p = np.exp(t.data)
    return (g - p * g.sum(axis=1, keepdims=True),)

BACKWARD["log_softmax_rows"] = _log_softmax_rows_bwd


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize each row to zero mean / unit population variance, then
    apply the per-feature affine transform gamma * xhat + beta."""
    if x.ndim != 2 or x.shape[1] < 2:
        raise ShapeError(f"layer_norm: expects a matrix with >= 2 columns, got {x.data.shape}")
    if gamma.data.shape != (x.shape[1],) or beta.data.shape != (x.shape[1],):
        raise ShapeError(
            f"layer_norm: gamma {gamma.data.shape} / beta {beta.data.shape} "
            f"do not match feature width {x.shape[1]}")
    mu = x.data.mean(axis=1, keepdims=True)
    var = ((x.data - mu) ** 2).mean(axis=1, keepdims=True)
    std = np.sqrt(var + eps)
    xhat = (x.data - mu) / std
    y = xhat * gamma.data + beta.data
    return _make(y, "layer_norm", (x, gamma, beta), saved=(xhat, std))

def _layer_norm_bwd(t, g):
    xhat, std = t.saved
    gamma = t.parents[1].data
    dgamma = (g * xhat).sum(axis=0)
    dbeta = g.sum(axis=0)
    dxhat = g * gamma
    dx = (dxhat
          - dxhat.mean(axis=1, keepdims=True)
          - xhat * (dxhat * xhat).mean(axis=1, keepdims=True)) / std
    return (dx, dgamma, dbeta)

BACKWARD["layer_norm"] = _layer_norm_bwd


def mean_rows(x: Tensor) -> Tensor:
    if x.ndim != 2:
        raise ShapeError(f"mean_rows: expects a matrix, got {x.data.shape}")
    if x.shape[0] == 0:
        raise ValueError("mean_rows: empty sequence (no rows to pool)")
    return _make(x.data.mean(axis=0), "mean_rows", (x,))

BACKWARD["mean_rows"] = lambda t, g: (
    np.broadcast_to(g / t.parents[0].shape[0], t.parents[0].shape),
)


def max_rows(x: Tensor) -> Tensor:
    """Column-wise max; on ties the gradient goes to the lowest row index."""
    if x.ndim != 2:
        raise ShapeError(f"max_rows: expects a matrix, got {x.data.shape}")
    if x.shape[0] == 0:
        raise ValueError("max_rows: empty sequence (no rows to pool)")
    idx = x.data.argmax(axis=0)
    cols = np.arange(x.shape[1])
    return _make(x.data[idx, cols], "max_rows", (x,), saved=idx)

def _max_rows_bwd(t, g):
    x = t.parents[0]
    dx = np.zeros(x.shape)
    dx[t.saved, np.arange(x.shape[1])] = g
    return (dx,)

BACKWARD["max_rows"] = _max_rows_bwd


def pool(x: Tensor, kind: str) -> Tensor:
    """Column-wise pooling of an m-by-k matrix down to a k-vector."""
    if kind == "mean":
        return mean_rows(x)
    if kind == "max":
        return max_rows(x)
    raise ValueError(f"pool: unknown kind {kind!r} (expected 'mean' or 'max')")


def sum_rows(x: Tensor) -> Tensor:
    if x.ndim != 2:
        raise ShapeError(f"sum_rows: expects a matrix, got {x.data.shape}")
    return _make(x.data.sum(axis=1), "sum_rows", (x,))

BACKWARD["sum_rows"] = lambda t, g: (
    np.broadcast_to(g[:, None], t.parents[0].shape),
)


def sum_all(x: Tensor) -> Tensor:
    return _make(x.data.sum(), "sum_all", (x,))

BACKWARD["sum_all"] = lambda t, g: (np.broadcast_to(g, t.parents[0].shape),)


def normalize_rows(x: Tensor) -> Tensor:
    """Scale each row to unit Euclidean norm."""
    if x.ndim != 2:
        raise ShapeError(f"normalize_rows: expects a matrix, got {x.data.shape}")
    norms = np.linalg.norm(x.data, axis=1, keepdims=True)
    if (norms == 0.0).any():
        raise NumericError("normalize_rows: zero-norm row")
    return _make(x.data / norms, "normalize_rows", (x,), saved=norms)

def _normalize_rows_bwd(t, g):
    y = t.data
    norms = t.saved
    return ((g - y * (g * y).sum(axis=1, keepdims=True)) / norms,)

BACKWARD["normalize_rows"] = _normalize_rows_bwd


def cosine_sim(u: Tensor, v: Tensor) -> Tensor:
    """Cosine of the angle between two vectors; both must have nonzero norm."""
    if u.ndim != 1 or v.ndim != 1 or u.shape != v.shape:
        raise ShapeError(f"cosine_sim: expects equal-length vectors, got {u.data.shape} and {v.data.shape}")
    nu = float(np.linalg.norm(u.data))
    nv = float(np.linalg.norm(v.data))
    if nu == 0.0 or nv == 0.0:
        raise NumericError("cosine_sim: zero-norm operand")
    c = float(np.clip(u.data @ v.data / (nu * nv), -1.0, 1.0))
    return _make(np.float64(c), "cosine_sim", (u, v), saved=(nu, nv, c))

def _cosine_sim_bwd(t, g):
    u, v = t.parents[0].data, t.parents[1].data
    nu, nv, c = t.saved
    du = g * (v / (nu * nv) - c * u / (nu * nu))
    dv = g * (u / (nu * nv) - c * v / (nv * nv))
    return (du, dv)

BACKWARD["cosine_sim"] = _cosine_sim_bwd


# ---------------------------------------------------------------------------
# structural ops
# ---------------------------------------------------------------------------

def concat(xs: Sequence[Tensor]) -> Tensor:
    """Concatenate vectors end to end."""
    if not xs:
        raise ValueError("concat: nothing to concatenate")
    for x in xs:
        if x.ndim != 1:
            raise ShapeError(f"concat: expects vectors, got {x.data.shape}")
    widths = [x.shape[0] for x in xs]
    return _make(np.concatenate([x.data for x in xs]), "concat", xs, saved=widths)

def _concat_bwd(t, g):
    offs = np.cumsum([0] + t.saved)
    return tuple(g[offs[i]:offs[i + 1]] for i in range(len(t.saved)))

BACKWARD["concat"] = _concat_bwd


def concat_cols(xs: Sequence[Tensor]) -> Tensor:
    """Concatenate matrices with equal row counts along the feature axis."""
    if not xs:
        raise ValueError("concat_cols: nothing to concatenate")
    rows = xs[0].shape[0]
    for x in xs:
        if x.ndim != 2 or x.shape[0] != rows:
            raise ShapeError(f"concat_cols: row counts differ ({[y.data.shape for y in xs]})")
    widths = [x.shape[1] for x in xs]
    return _make(np.concatenate([x.data for x in xs], axis=1), "concat_cols", xs, saved=widths)

def _concat_cols_bwd(t, g):
    offs = np.cumsum([0] + t.saved)
    return tuple(g[:, offs[i]:offs[i + 1]] for i in range(len(t.saved)))

BACKWARD["concat_cols"] = _concat_cols_bwd


def stack_rows(xs: Sequence[Tensor]) -> Tensor:
    """Stack equal-length vectors into a matrix, one per row."""
    if not xs:
        raise ValueError("stack_rows: nothing to stack")
    width = xs[0].shape[0]
    for x in xs:
        if x.ndim != 1 or x.shape[0] != width:
            raise ShapeError(f"stack_rows: vector lengths differ ({[y.data.shape for y in xs]})")
    return _make(np.stack([x.data for x in xs]), "stack_rows", xs)

BACKWARD["stack_rows"] = lambda t, g: tuple(g[i] for i in range(len(t.parents)))


def embed_rows(table: Tensor, ids: Sequence[int]) -> Tensor:
    """Gather rows of an embedding table; gradients scatter-add back."""
    if table.ndim != 2:
        raise ShapeError(f"embed_rows: table must be a matrix, got {table.data.shape}")
    ids = tuple(int(i) for i in ids)
    n = table.shape[0]
    for i in ids:
        if not 0 <= i < n:
            raise IndexError(f"embed_rows: id {i} out of range for table with {n} rows")
    return _make(table.data[list(ids)], "embed_rows", (table,), saved=ids)

def _embed_rows_bwd(t, g):
    dtable = np.zeros(t.parents[0].shape)
    np.add.at(dtable, list(t.saved), g)
    return (dtable,)

BACKWARD["embed_rows"] = _embed_rows_bwd


def coattention_scores(w: Tensor, p: Tensor, s_p: Tensor, s_h: Tensor) -> Tensor:
    """Token-pair relevance scores.

    Entry (i, j) is p . tanh(w @ (s_p[i] * s_h[j])): the elementwise
    product of the two token states is mapped through w into a latent
    space, squashed, and scored against p.
    """
    if w.ndim != 2 or p.ndim != 1 or w.shape[0] != p.shape[0]:
        raise ShapeError(f"coattention_scores: w {w.data.shape} and p {p.data.shape} do not align")
    if s_p.ndim != 2 or s_h.ndim != 2 or s_p.shape[1] != w.shape[1] or s_h.shape[1] != w.shape[1]:
        raise ShapeError(
            f"coattention_scores: states {s_p.data.shape}/{s_h.data.shape} "
            f"do not match w {w.data.shape}")
    u = s_p.data[:, None, :] * s_h.data[None, :, :]          # m,n,k
    t = np.tanh(np.einsum("mnk,dk->mnd", u, w.data))          # m,n,d
    c = np.einsum("mnd,d->mn", t, p.data)                     # m,n
    return _make(c, "coattention_scores", (w, p, s_p, s_h), saved=(u, t))

def _coattention_scores_bwd(out, g):
    w, p, s_p, s_h = (t.data for t in out.parents)
    u, t = out.saved
    dt = g[:, :, None] * p                                   # m,n,d
    da = dt * (1.0 - t ** 2)                                 # m,n,d
    dp = np.einsum("mnd,mn->d", t, g)
    dw = np.einsum("mnd,mnk->dk", da, u)
    du = np.einsum("mnd,dk->mnk", da, w)
    ds_p = (du * s_h[None, :, :]).sum(axis=1)
    ds_h = (du * s_p[:, None, :]).sum(axis=0)
    return (dw, dp, ds_p, ds_h)

BACKWARD["coattention_scores"] = _coattention_scores_bwd


# ---------------------------------------------------------------------------
# backward pass
# ---------------------------------------------------------------------------

def backward(loss: Tensor) -> None:
    """Populate gradients of every tensor the scalar loss depends on.

    The graph is consumed: a second call on the same loss raises, since
    gradients would silently double otherwise. Rebuild the forward pass
    (and reset leaf grads) between steps.
    """
    if loss.data.shape != ():
        raise ShapeError(f"backward: loss must be a scalar, got shape {loss.data.shape}")
    if loss._backward_done:
        raise RuntimeError("backward: graph already consumed; rebuild the forward pass")
    loss._backward_done = True

    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            stack.append((parent, False))

    loss.grad = np.ones(())
    for node in reversed(order):
        if node.op is None or node.grad is None:
            continue
        grads = BACKWARD[node.op](node, node.grad)
        for parent, g in zip(node.parents, grads):
            if not parent.requires_grad or g is None:
                continue
            if parent.grad is None:
                parent.grad = np.array(g, dtype=np.float64)
            else:
                parent.grad += g
