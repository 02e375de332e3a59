"""Reverse-mode automatic differentiation over dense numpy arrays.

A Tensor wraps a numpy array; every operation that produces one records its
parent tensors and a vector-Jacobian closure on the result. ``backward``
replays those closures in reverse topological order and accumulates
gradients on every tensor that requires them.

Kernels delegate to numpy, whose reductions run in a fixed order for a given
build, so repeated runs with identical inputs are bit-stable on one machine.
Precision follows the arrays: create parameters as float64 for checking,
float32 for training.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = [
    "Rng",
    "Tensor",
    "backward",
    "concat",
    "dropout",
    "embedding_lookup",
    "finite_diff_check",
    "log_softmax",
    "masked_softmax",
    "matmul",
    "sigmoid",
    "stack",
    "tanh",
    "transpose",
]


class Rng:
    """Seeded random stream backed by a fixed generator (PCG64).

    The same seed yields the same stream on every platform. ``child``
    derives an independent, reproducible stream from a string label.
    """

    def __init__(self, seed):
        self.seed = seed
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))

    def child(self, label: str) -> "Rng":
        tag = zlib.crc32(str(label).encode("utf-8"))
        base = self.seed if isinstance(self.seed, (list, tuple)) else [self.seed]
        return Rng(list(base) + [tag])

    def normal(self, shape=(), sigma=1.0):
        return self._gen.normal(0.0, sigma, size=shape)

    def random(self, shape=()):
        return self._gen.random(size=shape)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size=size)

    def permutation(self, n):
        return self._gen.permutation(n)

    def choice(self, n, size, replace=True):
        return self._gen.choice(n, size=size, replace=replace)


class Tensor:
    """Dense numeric array participating in a differentiable computation."""

    __slots__ = ("values", "grad", "requires_grad", "_parents", "_vjp", "_consumed")

    def __init__(self, values, requires_grad: bool = False, dtype=None):
        arr = np.asarray(values, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.values = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._vjp = None
        self._consumed = False

    # -- basic introspection -------------------------------------------------

    @property
    def shape(self):
        return self.values.shape

    @property
    def dtype(self):
        return self.values.dtype

    def item(self) -> float:
        return float(self.values)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.values.shape}, dtype={self.values.dtype}, requires_grad={self.requires_grad})"

    # -- operators -------------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("tensor division is only supported by scalars")
        return mul(self, 1.0 / float(other))

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def sum(self, axis=None):
        return tsum(self, axis=axis)

    def mean(self, axis=None):
        return tmean(self, axis=axis)

    def transpose(self):
        return transpose(self)

    def backward(self):
        backward(self)


def _as_tensor(x, like: Tensor | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.values.dtype if like is not None else None
    return Tensor(np.asarray(x, dtype=dtype))


def _result(values, parents, vjp) -> Tensor:
    """Wrap an op result; constants short-circuit out of the graph."""
    if not any(p.requires_grad for p in parents):
        return Tensor(values)
    out = Tensor(values)
    out.requires_grad = True
    out._parents = tuple(parents)
    out._vjp = vjp
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient back down to the shape it was broadcast from."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# -- primitive operations ---------------------------------------------------


def add(a, b) -> Tensor:
    a = _as_tensor(a, like=b if isinstance(b, Tensor) else None)
    b = _as_tensor(b, like=a)
    values = a.values + b.values

    def vjp(g):
        return _unbroadcast(g, a.values.shape), _unbroadcast(g, b.values.shape)

    return _result(values, (a, b), vjp)


def mul(a, b) -> Tensor:
    a = _as_tensor(a, like=b if isinstance(b, Tensor) else None)
    b = _as_tensor(b, like=a)
    values = a.values * b.values

    def vjp(g):
        return (
            _unbroadcast(g * b.values, a.values.shape),
            _unbroadcast(g * a.values, b.values.shape),
        )

    return _result(values, (a, b), vjp)


def matmul(a, b) -> Tensor:
    """Matrix product for 2D@2D, 2D@1D, 1D@2D and 1D@1D operands."""
    a = _as_tensor(a)
    b = _as_tensor(b)
    va, vb = a.values, b.values
    values = va @ vb

    def vjp(g):
        if va.ndim == 2 and vb.ndim == 2:
            return g @ vb.T, va.T @ g
        if va.ndim == 2 and vb.ndim == 1:
            return np.outer(g, vb), va.T @ g
        if va.ndim == 1 and vb.ndim == 2:
            return vb @ g, np.outer(va, g)
        return g * vb, g * va

    return _result(values, (a, b), vjp)


def transpose(a) -> Tensor:
    a = _as_tensor(a)
    if a.values.ndim != 2:
        raise ValueError("transpose expects a 2D tensor")

    def vjp(g):
        return (g.T,)

    return _result(a.values.T.copy(), (a,), vjp)


def tanh(a) -> Tensor:
    a = _as_tensor(a)
    values = np.tanh(a.values)

    def vjp(g):
        return (g * (1.0 - values * values),)

    return _result(values, (a,), vjp)


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    x = a.values
    values = np.empty_like(x)
    pos = x >= 0
    values[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    values[~pos] = ex / (1.0 + ex)

    def vjp(g):
        return (g * values * (1.0 - values),)

    return _result(values, (a,), vjp)


def getitem(a, idx) -> Tensor:
    a = _as_tensor(a)
    values = np.array(a.values[idx])

    def vjp(g):
        out = np.zeros_like(a.values)
        np.add.at(out, idx, g)
        return (out,)

    return _result(values, (a,), vjp)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    values = np.concatenate([t.values for t in tensors], axis=axis)
    sizes = [t.values.shape[axis] for t in tensors]

    def vjp(g):
        splits = np.cumsum(sizes[:-1])
        return tuple(np.split(g, splits, axis=axis))

    return _result(values, tensors, vjp)


def stack(tensors) -> Tensor:
    """Stack equal-shape tensors along a new leading axis."""
    tensors = [_as_tensor(t) for t in tensors]
    values = np.stack([t.values for t in tensors])

    def vjp(g):
        return tuple(g[i] for i in range(len(tensors)))

    return _result(values, tensors, vjp)


def tsum(a, axis=None) -> Tensor:
    a = _as_tensor(a)
    values = a.values.sum(axis=axis)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, a.values.shape).astype(a.values.dtype),)
        ge = np.expand_dims(g, axis)
        return (np.broadcast_to(ge, a.values.shape).copy(),)

    return _result(values, (a,), vjp)


def tmean(a, axis=None) -> Tensor:
    a = _as_tensor(a)
    n = a.values.size if axis is None else a.values.shape[axis]
    return mul(tsum(a, axis=axis), 1.0 / n)


def masked_softmax(x, mask=None, axis: int = -1) -> Tensor:
    """Softmax over ``axis`` restricted to positions where ``mask`` is nonzero.

    Masked positions come out exactly zero; live entries are positive and sum
    to one per row. Computed with max-subtraction for stability. Every row
    must keep at least one live entry.
    """
    x = _as_tensor(x)
    if mask is None:
        live = np.ones(x.values.shape, dtype=bool)
    else:
        marr = np.asarray(mask.values if isinstance(mask, Tensor) else mask)
        live = np.broadcast_to(marr > 0, x.values.shape)
    if not live.any(axis=axis).all():
        raise ValueError("masked_softmax: a row is fully masked")

    shifted = np.where(live, x.values, -np.inf)
    m = shifted.max(axis=axis, keepdims=True)
    e = np.zeros_like(x.values)
    e[live] = np.exp((x.values - m)[live])
    values = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        dot = (g * values).sum(axis=axis, keepdims=True)
        return (values * (g - dot),)

    return _result(values, (x,), vjp)


def log_softmax(x, axis: int = -1) -> Tensor:
    """Numerically stable log-softmax (fused, for cross-entropy from logits)."""
    x = _as_tensor(x)
    m = x.values.max(axis=axis, keepdims=True)
    shifted = x.values - m
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True)) + m
    values = x.values - lse

    def vjp(g):
        return (g - np.exp(values) * g.sum(axis=axis, keepdims=True),)

    return _result(values, (x,), vjp)


def dropout(x, rate: float, rng: Rng | None = None, train: bool = False) -> Tensor:
    """Inverted dropout: scale kept units by 1/(1-rate) at train time, identity at eval."""
    x = _as_tensor(x)
    if not train or rate <= 0.0:
        return x
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if rng is None:
        raise ValueError("dropout in train mode needs an Rng")
    keep = (rng.random(x.values.shape) >= rate).astype(x.values.dtype)
    scale = keep / (1.0 - rate)
    values = x.values * scale

    def vjp(g):
        return (g * scale,)

    return _result(values, (x,), vjp)


def embedding_lookup(table, ids) -> Tensor:
    """Gather columns of ``table`` ([d x cols]) by integer ids of any shape.

    Output shape is ids.shape + (d,). Gradients accumulate per column, so
    repeated ids sum their contributions.
    """
    table = _as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    cols = table.values.shape[1]
    if ids.size and (ids.min() < 0 or ids.max() >= cols):
        raise IndexError(f"embedding id out of range [0, {cols})")
    values = np.moveaxis(table.values[:, ids], 0, -1).copy()

    def vjp(g):
        out = np.zeros_like(table.values)
        np.add.at(out, (slice(None), ids), np.moveaxis(g, -1, 0))
        return (out,)

    return _result(values, (table,), vjp)


# -- backward pass ----------------------------------------------------------


def _toposort(root: Tensor) -> list[Tensor]:
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
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every requires_grad tensor reachable from ``loss``.

    One backward pass per forward pass: calling this twice on the same graph
    raises. Gradients accumulate onto leaves, so zero parameter grads between
    optimization steps.
    """
    if loss.values.shape != ():
        raise ValueError("backward expects a scalar loss")
    if loss._consumed:
        raise RuntimeError("backward already ran for this graph; rebuild the forward pass")

    order = _toposort(loss)
    loss.grad = np.ones_like(loss.values)
    for node in reversed(order):
        node._consumed = True
        if node._vjp is None or node.grad is None:
            continue
        parent_grads = node._vjp(node.grad)
        for parent, pg in zip(node._parents, parent_grads):
            if pg is None or not parent.requires_grad:
                continue
            if parent.grad is None:
                parent.grad = np.zeros_like(parent.values)
            parent.grad += pg


# -- finite-difference harness ----------------------------------------------


class FiniteDiffReport:
    """Per-element comparison of analytic vs central-difference gradients."""

    def __init__(self, name, max_rel_error, failures, checked, tol):
        self.name = name
        self.max_rel_error = max_rel_error
        self.failures = failures
        self.checked = checked
        self.tol = tol

    @property
    def passed(self) -> bool:
        return not self.failures

    def __repr__(self):
        status = "ok" if self.passed else f"{len(self.failures)} FAILURES"
        return (
            f"FiniteDiffReport({self.name or 'theta'}: {status}, "
            f"max_rel={self.max_rel_error:.3e}, checked={self.checked}, tol={self.tol:g})"
        )


def finite_diff_check(f, theta: Tensor, h: float = 1e-5, tol: float = 1e-4, name: str = "") -> FiniteDiffReport:
    """Check d f / d theta against central finite differences.

    ``f`` must rebuild a fresh scalar-producing graph on each call and be
    deterministic (dropout off or masks fixed). ``theta`` is perturbed in
    place element by element and restored. Relative error per element is
    |g_a - g_n| / (|g_a| + |g_n| + 1e-8).
    """
    theta.zero_grad()
    loss = f(theta)
    backward(loss)
    analytic = (
        theta.grad.copy() if theta.grad is not None else np.zeros_like(theta.values)
    )

    flat = theta.values.reshape(-1)
    numeric = np.zeros(flat.shape, dtype=np.float64)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(theta).item()
        flat[i] = orig - h
        fm = f(theta).item()
        flat[i] = orig
        numeric[i] = (fp - fm) / (2.0 * h)

    a = analytic.reshape(-1).astype(np.float64)
    rel = np.abs(a - numeric) / (np.abs(a) + np.abs(numeric) + 1e-8)
    bad = np.nonzero(rel > tol)[0]
    failures = [
        (int(i), float(a[i]), float(numeric[i]), float(rel[i])) for i in bad
    ]
    max_rel = float(rel.max()) if rel.size else 0.0
    return FiniteDiffReport(name, max_rel, failures, int(flat.size), tol)
