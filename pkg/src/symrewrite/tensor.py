"""Dense float64 tensors with a reverse-mode tape.

Ops record a backward closure on the active :class:`Tape`; outside a tape
they only compute values, which is how inference runs. Creation order is a
valid topological order, so backward is a single reverse sweep.

>>> w = Parameter(np.array([[2.0]]), "w")
>>> with Tape() as tape:
...     y = matmul(Tensor(np.array([[3.0]])), w)
...     tape.backward(y)
>>> float(w.grad[0, 0])
3.0
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np

from . import kernels
from .errors import NumericError, ShapeError
from .rng import Stream


class Tensor:
    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"


class Parameter(Tensor):
    """A trainable tensor whose gradient buffer persists across steps."""

    __slots__ = ("name",)

    def __init__(self, data, name: str):
        super().__init__(np.array(data, dtype=np.float64), requires_grad=True)
        self.name = name
        self.grad = np.zeros_like(self.data)

    def zero_grad(self) -> None:
        self.grad.fill(0.0)

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


class Tape:
    _stack: list["Tape"] = []

    def __init__(self):
        self.records: list[tuple[Tensor, Callable[[np.ndarray], None]]] = []

    def __enter__(self) -> "Tape":
        Tape._stack.append(self)
        return self

    def __exit__(self, *exc) -> None:
        Tape._stack.pop()

    def backward(self, loss: Tensor, scale: float = 1.0) -> None:
        """Accumulate gradients of ``scale * loss`` into every parameter."""
        if loss.data.size != 1:
            raise ShapeError(f"backward needs a scalar, got shape {loss.shape}")
        loss.grad = np.full_like(loss.data, scale)
        for out, fn in reversed(self.records):
            if out.grad is not None:
                fn(out.grad)
        self.records.clear()


def _active() -> Tape | None:
    return Tape._stack[-1] if Tape._stack else None


def _finite(arr: np.ndarray, op: str) -> np.ndarray:
    # a finite sum proves every entry finite; confirm before rejecting overflow
    if not math.isfinite(arr.sum()) and not np.isfinite(arr).all():
        raise NumericError(f"{op} produced a non-finite value")
    return arr


def _result(data: np.ndarray, op: str, parents: Sequence[Tensor],
            backward: Callable[[np.ndarray], None]) -> Tensor:
    _finite(data, op)
    needs = any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=needs)
    tape = _active()
    if needs and tape is not None:
        tape.records.append((out, backward))
    return out


def _acc(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if isinstance(t, Parameter):
        t.grad += g
    elif t.grad is None:
        t.grad = g
    else:
        t.grad = t.grad + g


def _same(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


# ops -------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor, transpose_b: bool = False) -> Tensor:
    """``a @ b`` (or ``a @ b.T``) for 2-d operands."""
    bd = b.data.T if transpose_b else b.data
    if a.data.ndim != 2 or bd.ndim != 2 or a.shape[1] != bd.shape[0]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape}"
                         + (" (b transposed)" if transpose_b else "") + " are incompatible")
    ad = a.data

    def backward(g):
        _acc(a, g @ bd.T)
        _acc(b, (ad.T @ g).T if transpose_b else ad.T @ g)

    return _result(ad @ bd, "matmul", (a, b), backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    _same(a, b, "add")

    def backward(g):
        _acc(a, g)
        _acc(b, g)

    return _result(a.data + b.data, "add", (a, b), backward)


def add_bias(a: Tensor, bias: Tensor) -> Tensor:
    """Adds a vector along the last axis of ``a``."""
    if bias.data.ndim != 1 or a.shape[-1] != bias.shape[0]:
        raise ShapeError(f"add_bias: shapes {a.shape} and {bias.shape} are incompatible")

    def backward(g):
        _acc(a, g)
        _acc(bias, g.reshape(-1, g.shape[-1]).sum(axis=0))

    return _result(a.data + bias.data, "add_bias", (a, bias), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same(a, b, "mul")
    ad, bd = a.data, b.data

    def backward(g):
        _acc(a, g * bd)
        _acc(b, g * ad)

    return _result(ad * bd, "mul", (a, b), backward)


def sigmoid(a: Tensor) -> Tensor:
    y = 0.5 * (1.0 + np.tanh(0.5 * a.data))

    def backward(g):
        _acc(a, g * y * (1.0 - y))

    return _result(y, "sigmoid", (a,), backward)


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)

    def backward(g):
        _acc(a, g * (1.0 - y * y))

    return _result(y, "tanh", (a,), backward)


def concat(parts: Sequence[Tensor]) -> Tensor:
    """Concatenates along the last axis."""
    lead = parts[0].shape[:-1]
    for p in parts[1:]:
        if p.shape[:-1] != lead:
            raise ShapeError(f"concat: shapes {parts[0].shape} and {p.shape} are incompatible")
    widths = [p.shape[-1] for p in parts]
    bounds = np.cumsum([0] + widths)

    def backward(g):
        for p, lo, hi in zip(parts, bounds[:-1], bounds[1:]):
            _acc(p, g[..., lo:hi])

    return _result(np.concatenate([p.data for p in parts], axis=-1), "concat", parts, backward)


def slice_last(a: Tensor, start: int, stop: int) -> Tensor:
    """``a[..., start:stop]``."""
    if not 0 <= start < stop <= a.shape[-1]:
        raise ShapeError(f"slice_last: [{start}:{stop}] out of range for shape {a.shape}")

    def backward(g):
        full = np.zeros_like(a.data)
        full[..., start:stop] = g
        _acc(a, full)

    return _result(a.data[..., start:stop], "slice_last", (a,), backward)


def stack(parts: Sequence[Tensor], axis: int = 1) -> Tensor:
    for p in parts[1:]:
        _same(parts[0], p, "stack")

    def backward(g):
        for i, p in enumerate(parts):
            _acc(p, np.take(g, i, axis=axis))

    return _result(np.stack([p.data for p in parts], axis=axis), "stack", parts, backward)


def take_rows(a: Tensor, rows: np.ndarray) -> Tensor:
    """``a[rows]`` for a 2-d ``a``."""
    if a.data.ndim != 2:
        raise ShapeError(f"take_rows: shape {a.shape} is not 2-d")

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, rows, g)
        _acc(a, full)

    return _result(a.data[rows], "take_rows", (a,), backward)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    src = a.shape
    try:
        y = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view {src} as {shape}") from None

    def backward(g):
        _acc(a, g.reshape(src))

    return _result(y, "reshape", (a,), backward)


def softmax(a: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Softmax over the last axis; entries where ``mask`` is False get 0."""
    x = a.data
    if mask is not None:
        if mask.shape != x.shape:
            raise ShapeError(f"softmax: mask {mask.shape} vs input {x.shape}")
        x = np.where(mask, x, -np.inf)
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    y = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        _acc(a, y * (g - (g * y).sum(axis=-1, keepdims=True)))

    return _result(y, "softmax", (a,), backward)


def batch_matvec(m: Tensor, v: Tensor) -> Tensor:
    """Row-wise ``m[b] @ v[b]`` for ``m`` (B, S, H) and ``v`` (B, H) -> (B, S)."""
    if m.data.ndim != 3 or v.data.ndim != 2 or m.shape[::2] != v.shape:
        raise ShapeError(f"batch_matvec: shapes {m.shape} and {v.shape} are incompatible")
    md, vd = m.data, v.data

    def backward(g):
        _acc(m, g[:, :, None] * vd[:, None, :])
        _acc(v, np.einsum("bs,bsh->bh", g, md))

    return _result(np.einsum("bsh,bh->bs", md, vd), "batch_matvec", (m, v), backward)


def weighted_sum(w: Tensor, m: Tensor) -> Tensor:
    """``sum_s w[b, s] * m[b, s, :]`` for ``w`` (B, S) and ``m`` (B, S, H) -> (B, H)."""
    if m.data.ndim != 3 or w.data.ndim != 2 or m.shape[:2] != w.shape:
        raise ShapeError(f"weighted_sum: shapes {w.shape} and {m.shape} are incompatible")
    wd, md = w.data, m.data

    def backward(g):
        _acc(w, np.einsum("bh,bsh->bs", g, md))
        _acc(m, wd[:, :, None] * g[:, None, :])

    return _result(np.einsum("bs,bsh->bh", wd, md), "weighted_sum", (w, m), backward)


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    ids = np.asarray(ids, dtype=np.int64)
    if table.data.ndim != 2:
        raise ShapeError(f"embedding: table shape {table.shape} is not 2-d")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ShapeError(f"embedding: ids out of range for table {table.shape}")

    def backward(g):
        if isinstance(table, Parameter):
            np.add.at(table.grad, ids, g)
        else:
            full = np.zeros_like(table.data)
            np.add.at(full, ids, g)
            _acc(table, full)

    return _result(table.data[ids], "embedding", (table,), backward)


def dropout_scale(p: float, shape, rng: Stream) -> np.ndarray:
    """Inverted-dropout multipliers: 0 with probability ``p``, else ``1/(1-p)``."""
    if p >= 1.0:
        return np.zeros(shape)
    return rng.bernoulli_mask(1.0 - p, shape) / (1.0 - p)


def dropout(a: Tensor, p: float, rng: Stream | None,
            scale: np.ndarray | None = None) -> Tensor:
    """Inverted dropout; identity when ``p == 0`` or no randomness is given.

    ``scale`` supplies multipliers drawn ahead of time by :func:`dropout_scale`.
    """
    if p == 0.0 or (rng is None and scale is None):
        return a
    scaled = dropout_scale(p, a.shape, rng) if scale is None else scale
    if scaled.shape != a.shape:
        raise ShapeError(f"dropout: scale {scaled.shape} vs input {a.shape}")

    def backward(g):
        _acc(a, g * scaled)

    return _result(a.data * scaled, "dropout", (a,), backward)


def cross_entropy(logits: Tensor, targets: np.ndarray, ignore: int = -1) -> Tensor:
    """Mean token cross-entropy over rows whose target is not ``ignore``."""
    targets = np.ascontiguousarray(targets, dtype=np.int64)
    if logits.data.ndim != 2 or targets.shape != logits.shape[:1]:
        raise ShapeError(f"cross_entropy: logits {logits.shape} vs targets {targets.shape}")
    count = int((targets != ignore).sum())
    if count == 0:
        raise ShapeError("cross_entropy: every target is ignored")
    data = np.ascontiguousarray(logits.data)
    total, probs = kernels.xent_forward(data, targets, ignore)

    def backward(g):
        _acc(logits, kernels.xent_backward(probs, targets, ignore, float(g) / count))

    return _result(np.asarray(total / count), "cross_entropy", (logits,), backward)


def lstm_cell(x: Tensor, state: Tensor, w_ih: Tensor, w_hh: Tensor, bias: Tensor,
              mask: np.ndarray | None = None) -> Tensor:
    """One LSTM step on a packed ``[h | c]`` state of shape (B, 2H).

    Weights are ``w_ih`` (4H, D), ``w_hh`` (4H, H), ``bias`` (4H,), gates in
    ``[i f g o]`` order. Rows where ``mask`` is False keep their old state.
    """
    B, H2 = state.shape
    H = H2 // 2
    if (x.data.ndim != 2 or x.shape[0] != B or w_ih.shape != (4 * H, x.shape[1])
            or w_hh.shape != (4 * H, H) or bias.shape != (4 * H,)):
        raise ShapeError(f"lstm_cell: x {x.shape}, state {state.shape}, w_ih {w_ih.shape}, "
                         f"w_hh {w_hh.shape}, bias {bias.shape} are incompatible")
    xd = x.data
    h_prev = state.data[:, :H]
    c_prev = np.ascontiguousarray(state.data[:, H:])
    pre = xd @ w_ih.data.T + h_prev @ w_hh.data.T + bias.data
    h, c, acts, tc = kernels.lstm_forward(pre, c_prev)
    new = np.concatenate([h, c], axis=1)
    keep = None
    if mask is not None:
        keep = np.asarray(mask, dtype=bool)[:, None]
        new = np.where(keep, new, state.data)

    def backward(g):
        if keep is not None:
            g_new = np.where(keep, g, 0.0)
            g_old = np.where(keep, 0.0, g)
        else:
            g_new, g_old = g, None
        dpre, dc_prev = kernels.lstm_backward(
            np.ascontiguousarray(g_new[:, :H]), np.ascontiguousarray(g_new[:, H:]),
            acts, c_prev, tc)
        _acc(w_ih, dpre.T @ xd)
        _acc(w_hh, dpre.T @ h_prev)
        _acc(bias, dpre.sum(axis=0))
        _acc(x, dpre @ w_ih.data)
        d_state = np.concatenate([dpre @ w_hh.data, dc_prev], axis=1)
        if g_old is not None:
            d_state = d_state + g_old
        _acc(state, d_state)

    return _result(new, "lstm_cell", (x, state, w_ih, w_hh, bias), backward)


# gradient checking -------------------------------------------------------------

def grad_check(fn: Callable[[], Tensor], params: Iterable[Parameter],
               eps: float = 1e-5) -> float:
    """Max relative error between tape gradients and central differences.

    ``fn`` must build a scalar loss deterministically from ``params``.
    The error per entry is ``|a - n| / max(|a|, |n|, 1e-8)``.
    """
    params = list(params)
    for p in params:
        p.zero_grad()
    with Tape() as tape:
        loss = fn()
        if not np.isfinite(loss.data).all():
            raise NumericError("loss is not finite")
        tape.backward(loss)
    worst = 0.0
    for p in params:
        analytic = p.grad.copy()
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = fn().data.item()
            flat[i] = orig - eps
            down = fn().data.item()
            flat[i] = orig
            numeric = (up - down) / (2 * eps)
            a = analytic.reshape(-1)[i]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst
