"""Small dense-tensor engine with reverse-mode differentiation.

Only the handful of operations the hierarchical encoder needs are provided.
Every op is a plain function returning a new :class:`Tensor`; tensors that
depend on a ``requires_grad`` input remember their parents and a closure
that pushes the output gradient back into them.  Nodes are stamped with a
global creation counter, so replaying them in decreasing stamp order is a
valid reverse topological order (the implicit tape).

Arrays are float64.  Any op producing a NaN/Inf raises
:class:`NonFiniteError` instead of letting it propagate silently.
"""

from __future__ import annotations

import itertools
from typing import Callable, Iterable, Sequence

import numpy as np

_counter = itertools.count()


class ShapeError(ValueError):
    """Operand shapes are incompatible."""


class NonFiniteError(FloatingPointError):
    """A NaN or infinity was produced or supplied."""


class MaskError(ValueError):
    """An attention mask left some row without any admissible entry."""


def _check_finite(arr: np.ndarray, where: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"non-finite value produced by {where}")


class Tensor:
    """Dense float64 array that can take part in reverse-mode differentiation."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward", "_seq")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        if any(s <= 0 for s in arr.shape):
            raise ShapeError(f"every extent must be positive, got {arr.shape}")
        _check_finite(arr, "Tensor()")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self._seq = next(_counter)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # operator sugar; all route through the functions below
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self):
        return transpose(self)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: Sequence[Tensor], backward_fn, where: str) -> Tensor:
    _check_finite(data, where)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.name = None
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = backward_fn
    else:
        out._parents = ()
        out._backward = None
    out._seq = next(_counter)
    return out


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _need_2d(t: Tensor, op: str) -> None:
    if t.data.ndim != 2:
        raise ShapeError(f"{op} expects a 2-D tensor, got shape {t.shape}")


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _need_2d(a, "matmul")
    _need_2d(b, "matmul")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} @ {b.shape}")

    def bw(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return _make(a.data @ b.data, (a, b), bw, "matmul")


def transpose(a) -> Tensor:
    a = _as_tensor(a)
    _need_2d(a, "transpose")

    def bw(g):
        _accum(a, g.T)

    return _make(a.data.T.copy(), (a,), bw, "transpose")


# ---------------------------------------------------------------------------
# elementwise


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _same_shape(a, b, "add")

    def bw(g):
        _accum(a, g)
        _accum(b, g)

    return _make(a.data + b.data, (a, b), bw, "add")


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _same_shape(a, b, "sub")

    def bw(g):
        _accum(a, g)
        _accum(b, -g)

    return _make(a.data - b.data, (a, b), bw, "sub")


def mul(a, b) -> Tensor:
    """Elementwise product of equally shaped tensors."""
    a, b = _as_tensor(a), _as_tensor(b)
    _same_shape(a, b, "mul")

    def bw(g):
        _accum(a, g * b.data)
        _accum(b, g * a.data)

    return _make(a.data * b.data, (a, b), bw, "mul")


def scale(a, c: float) -> Tensor:
    a = _as_tensor(a)
    c = float(c)

    def bw(g):
        _accum(a, g * c)

    return _make(a.data * c, (a,), bw, "scale")


def add_scalar(a, c: float) -> Tensor:
    a = _as_tensor(a)
    c = float(c)

    def bw(g):
        _accum(a, g)

    return _make(a.data + c, (a,), bw, "add_scalar")


def square(a) -> Tensor:
    a = _as_tensor(a)

    def bw(g):
        _accum(a, 2.0 * a.data * g)

    return _make(a.data * a.data, (a,), bw, "square")


def relu(a) -> Tensor:
    a = _as_tensor(a)
    on = a.data > 0

    def bw(g):
        _accum(a, g * on)

    return _make(np.where(on, a.data, 0.0), (a,), bw, "relu")


def add_row(x, row) -> Tensor:
    """``x[n, d] + row[1, d]`` with the row repeated down every line."""
    x, row = _as_tensor(x), _as_tensor(row)
    _need_2d(x, "add_row")
    if row.shape != (1, x.shape[1]):
        raise ShapeError(f"add_row: expected row of shape (1, {x.shape[1]}), got {row.shape}")

    def bw(g):
        _accum(x, g)
        _accum(row, g.sum(axis=0, keepdims=True))

    return _make(x.data + row.data, (x, row), bw, "add_row")


def scale_rows(x, w) -> Tensor:
    """``x[n, d] * w[n, 1]``: each line multiplied by its own weight."""
    x, w = _as_tensor(x), _as_tensor(w)
    _need_2d(x, "scale_rows")
    if w.shape != (x.shape[0], 1):
        raise ShapeError(f"scale_rows: expected weights of shape ({x.shape[0]}, 1), got {w.shape}")

    def bw(g):
        _accum(x, g * w.data)
        _accum(w, (g * x.data).sum(axis=1, keepdims=True))

    return _make(x.data * w.data, (x, w), bw, "scale_rows")


# ---------------------------------------------------------------------------
# reshaping / indexing


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    if not parts:
        raise ShapeError("concat_rows needs at least one tensor")
    for p in parts:
        _need_2d(p, "concat_rows")
        if p.shape[1] != parts[0].shape[1]:
            raise ShapeError(f"concat_rows: column counts differ, {p.shape} vs {parts[0].shape}")
    bounds = np.cumsum([0] + [p.shape[0] for p in parts])

    def bw(g):
        for p, lo, hi in zip(parts, bounds[:-1], bounds[1:]):
            _accum(p, g[lo:hi])

    return _make(np.concatenate([p.data for p in parts], axis=0), parts, bw, "concat_rows")


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    if not parts:
        raise ShapeError("concat_cols needs at least one tensor")
    for p in parts:
        _need_2d(p, "concat_cols")
        if p.shape[0] != parts[0].shape[0]:
            raise ShapeError(f"concat_cols: row counts differ, {p.shape} vs {parts[0].shape}")
    bounds = np.cumsum([0] + [p.shape[1] for p in parts])

    def bw(g):
        for p, lo, hi in zip(parts, bounds[:-1], bounds[1:]):
            _accum(p, g[:, lo:hi])

    return _make(np.concatenate([p.data for p in parts], axis=1), parts, bw, "concat_cols")


def rows(x, start: int, stop: int) -> Tensor:
    """Contiguous row slice ``x[start:stop]``."""
    x = _as_tensor(x)
    _need_2d(x, "rows")
    if not 0 <= start < stop <= x.shape[0]:
        raise ShapeError(f"rows: bad range [{start}, {stop}) for {x.shape[0]} rows")

    def bw(g):
        if x.requires_grad:
            full = np.zeros_like(x.data)
            full[start:stop] = g
            _accum(x, full)

    return _make(x.data[start:stop].copy(), (x,), bw, "rows")


def take_rows(x, index) -> Tensor:
    """Gather rows by integer index; repeated indices accumulate on the way back."""
    x = _as_tensor(x)
    _need_2d(x, "take_rows")
    idx = np.asarray(index, dtype=np.intp)
    if idx.ndim != 1 or idx.size == 0:
        raise ShapeError("take_rows: index must be a non-empty 1-D sequence")
    if idx.min() < 0 or idx.max() >= x.shape[0]:
        raise ShapeError(f"take_rows: index out of range for {x.shape[0]} rows")

    def bw(g):
        if x.requires_grad:
            full = np.zeros_like(x.data)
            np.add.at(full, idx, g)
            _accum(x, full)

    return _make(x.data[idx].copy(), (x,), bw, "take_rows")


# ---------------------------------------------------------------------------
# reductions and losses


def sum_all(x) -> Tensor:
    x = _as_tensor(x)

    def bw(g):
        _accum(x, np.full_like(x.data, g.reshape(-1)[0]))

    return _make(np.array([x.data.sum()]), (x,), bw, "sum")


def mean(x) -> Tensor:
    x = _as_tensor(x)
    n = x.data.size

    def bw(g):
        _accum(x, np.full_like(x.data, g.reshape(-1)[0] / n))

    return _make(np.array([x.data.sum() / n]), (x,), bw, "mean")


def mse(a, b) -> Tensor:
    """Mean of squared differences; either side may be a constant."""
    a, b = _as_tensor(a), _as_tensor(b)
    _same_shape(a, b, "mse")
    diff = a.data - b.data
    n = diff.size

    def bw(g):
        gd = (2.0 / n) * g.reshape(-1)[0] * diff
        _accum(a, gd)
        _accum(b, -gd)

    return _make(np.array([(diff * diff).sum() / n]), (a, b), bw, "mse")


# ---------------------------------------------------------------------------
# normalisation


def softmax(x, mask=None) -> Tensor:
    """Row-wise softmax; entries where ``mask`` is False get exactly zero weight."""
    x = _as_tensor(x)
    _need_2d(x, "softmax")
    logits = x.data
    if mask is not None:
        allowed = np.asarray(mask, dtype=bool)
        if allowed.shape != logits.shape:
            raise ShapeError(f"softmax: mask shape {allowed.shape} != input shape {logits.shape}")
        if not allowed.any(axis=1).all():
            bad = np.flatnonzero(~allowed.any(axis=1)).tolist()
            raise MaskError(f"softmax: rows {bad} are fully masked")
        logits = np.where(allowed, logits, -np.inf)
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)

    def bw(g):
        _accum(x, y * (g - (g * y).sum(axis=1, keepdims=True)))

    return _make(y, (x,), bw, "softmax")


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    """Standardise each row (biased variance) then apply ``gain``/``bias`` of shape (1, d)."""
    x, gain, bias = _as_tensor(x), _as_tensor(gain), _as_tensor(bias)
    _need_2d(x, "layer_norm")
    d = x.shape[1]
    if d < 2:
        raise ShapeError("layer_norm needs at least two features per row")
    if eps <= 0:
        raise ValueError("layer_norm eps must be positive")
    for t in (gain, bias):
        if t.shape != (1, d):
            raise ShapeError(f"layer_norm: affine params must have shape (1, {d}), got {t.shape}")
    mu = x.data.mean(axis=1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv

    def bw(g):
        _accum(gain, (g * xhat).sum(axis=0, keepdims=True))
        _accum(bias, g.sum(axis=0, keepdims=True))
        if x.requires_grad:
            gh = g * gain.data
            gx = inv * (gh - gh.mean(axis=1, keepdims=True)
                        - xhat * (gh * xhat).mean(axis=1, keepdims=True))
            _accum(x, gx)

    return _make(xhat * gain.data + bias.data, (x, gain, bias), bw, "layer_norm")


# ---------------------------------------------------------------------------
# differentiation


def _collect(root: Tensor) -> list[Tensor]:
    seen: set[int] = set()
    nodes: list[Tensor] = []
    stack = [root]
    while stack:
        t = stack.pop()
        if id(t) in seen or not t.requires_grad:
            continue
        seen.add(id(t))
        nodes.append(t)
        stack.extend(t._parents)
    nodes.sort(key=lambda t: t._seq, reverse=True)
    return nodes


def backward(loss: Tensor) -> None:
    """Accumulate ``d loss / d t`` into ``t.grad`` for every reachable tensor.

    Gradients add onto whatever is already stored, so clear parameters with
    :func:`zero_grads` between steps.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ValueError("loss does not depend on any tensor that requires grad")
    nodes = _collect(loss)
    # intermediate buffers start empty; leaves keep accumulating
    for t in nodes:
        if t._backward is not None:
            t.grad = None
    loss.grad = np.ones_like(loss.data)
    for t in nodes:
        if t._backward is not None and t.grad is not None:
            t._backward(t.grad)
    for t in nodes:
        if t.grad is not None:
            _check_finite(t.grad, "backward")


def zero_grads(params: Iterable[Tensor]) -> None:
    for p in params:
        p.zero_grad()
