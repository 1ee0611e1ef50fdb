"""Reverse-mode differentiation over dense float64 matrices.

Only the handful of operations the model needs are provided. Every op takes
and returns :class:`Tensor` objects; leaves that should receive gradients are
:class:`Param` instances. Values are numpy arrays that are never mutated in
place once wrapped, so a forward graph is a consistent snapshot.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ShapeError

CHECKPOINT_FORMAT = "graphsmile-params"
CHECKPOINT_VERSION = 1


class Tensor:
    __slots__ = ("value", "parents", "backward_fn", "requires_grad", "name")

    def __init__(self, value, parents: tuple = (), backward_fn=None, name: str = ""):
        self.value = np.asarray(value, dtype=np.float64)
        self.parents = parents
        self.backward_fn = backward_fn
        self.requires_grad = any(p.requires_grad for p in parents)
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.value.shape

    @property
    def rows(self) -> int:
        return self.value.shape[0]

    @property
    def cols(self) -> int:
        return self.value.shape[1]

    def item(self) -> float:
        if self.value.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.shape}")
        return float(self.value.reshape(()))

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return scale(self, -1.0)

    def __repr__(self) -> str:
        tag = f" {self.name!r}" if self.name else ""
        return f"<{type(self).__name__}{tag} shape={self.shape}>"


class Param(Tensor):
    """Trainable leaf. ``decay=False`` exempts it from weight decay."""

    __slots__ = ("grad", "decay")

    def __init__(self, value, name: str, decay: bool = True):
        super().__init__(value, name=name)
        self.requires_grad = True
        self.grad = np.zeros_like(self.value)
        self.decay = decay

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.value)

    def assign(self, value) -> None:
        value = np.asarray(value, dtype=np.float64)
        if value.shape != self.value.shape:
            raise ShapeError(f"{self.name}: cannot assign {value.shape} to {self.value.shape}")
        self.value = value.copy()


def const(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementary ops


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = const(a), const(b)
    if a.value.ndim != 2 or b.value.ndim != 2 or a.cols != b.rows:
        raise ShapeError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    av, bv = a.value, b.value

    def back(g):
        return g @ bv.T, av.T @ g

    return Tensor(av @ bv, (a, b), back)


def add(a, b) -> Tensor:
    a, b = const(a), const(b)
    try:
        out = a.value + b.value
    except ValueError as exc:
        raise ShapeError(f"add shape mismatch: {a.shape} + {b.shape}") from exc
    sa, sb = a.shape, b.shape

    def back(g):
        return _unbroadcast(g, sa), _unbroadcast(g, sb)

    return Tensor(out, (a, b), back)


def sub(a, b) -> Tensor:
    return add(a, scale(const(b), -1.0))


def mul(a, b) -> Tensor:
    """Elementwise product with row/column broadcasting; scalars allowed."""
    if not isinstance(a, Tensor) and np.ndim(a) == 0:
        return scale(b, float(a))
    if not isinstance(b, Tensor) and np.ndim(b) == 0:
        return scale(a, float(b))
    a, b = const(a), const(b)
    av, bv = a.value, b.value
    try:
        out = av * bv
    except ValueError as exc:
        raise ShapeError(f"mul shape mismatch: {a.shape} * {b.shape}") from exc

    def back(g):
        return _unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)

    return Tensor(out, (a, b), back)


def scale(x: Tensor, c: float) -> Tensor:
    x = const(x)
    return Tensor(x.value * c, (x,), lambda g: (g * c,))


def log(x: Tensor) -> Tensor:
    x = const(x)
    xv = x.value
    with np.errstate(divide="ignore"):
        out = np.log(xv)
    return Tensor(out, (x,), lambda g: (g / xv,))


def sum_all(x: Tensor) -> Tensor:
    x = const(x)
    shape = x.shape
    return Tensor(x.value.sum(), (x,), lambda g: (np.broadcast_to(g, shape).copy(),))


def mean_all(x: Tensor) -> Tensor:
    return scale(sum_all(x), 1.0 / max(const(x).value.size, 1))


def sum_axis(x: Tensor, axis: int) -> Tensor:
    """Sum over ``axis`` keeping it as a length-1 dimension."""
    x = const(x)
    shape = x.shape
    return Tensor(
        x.value.sum(axis=axis, keepdims=True), (x,), lambda g: (np.broadcast_to(g, shape).copy(),)
    )


def rsqrt_pos(x: Tensor) -> Tensor:
    """x**-0.5 where x > 0, zero elsewhere."""
    x = const(x)
    xv = x.value
    pos = xv > 0
    safe = np.where(pos, xv, 1.0)
    out = np.where(pos, safe**-0.5, 0.0)

    def back(g):
        return (np.where(pos, -0.5 * g * safe**-1.5, 0.0),)

    return Tensor(out, (x,), back)


def leaky_relu(x: Tensor, slope: float = 0.01) -> Tensor:
    x = const(x)
    pos = x.value > 0
    local = np.where(pos, 1.0, slope)
    return Tensor(x.value * local, (x,), lambda g: (g * local,))


def dropout(x: Tensor, rate: float, training: bool, seed=None) -> Tensor:
    """Inverted dropout. ``seed`` may be an int or a ``numpy.random.Generator``."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    x = const(x)
    if not training or rate == 0.0:
        return x
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return Tensor(x.value * mask, (x,), lambda g: (g * mask,))


def softmax_rows(x: Tensor) -> Tensor:
    x = const(x)
    z = x.value - x.value.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)

    def back(g):
        return (p * (g - (g * p).sum(axis=1, keepdims=True)),)

    return Tensor(p, (x,), back)


def log_softmax_rows(x: Tensor) -> Tensor:
    x = const(x)
    z = x.value - x.value.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    out = z - lse
    p = np.exp(out)

    def back(g):
        return (g - p * g.sum(axis=1, keepdims=True),)

    return Tensor(out, (x,), back)


def nll_rows(logp: Tensor, targets: Sequence[int], class_weights=None) -> Tensor:
    """Mean over rows of ``-w[t] * logp[row, t]``."""
    logp = const(logp)
    t = np.asarray(targets, dtype=np.int64)
    n, c = logp.shape
    if t.shape != (n,):
        raise ShapeError(f"{len(t)} targets for {n} rows")
    if n and (t.min() < 0 or t.max() >= c):
        raise ValueError(f"target out of range [0, {c})")
    w = np.ones(n) if class_weights is None else np.asarray(class_weights, dtype=np.float64)[t]
    rows = np.arange(n)
    denom = max(n, 1)
    out = -(w * logp.value[rows, t]).sum() / denom

    def back(g):
        grad = np.zeros((n, c))
        grad[rows, t] = -w * float(g) / denom
        return (grad,)

    return Tensor(out, (logp,), back)


def cross_entropy(probs: Tensor, targets: Sequence[int], class_weights=None) -> Tensor:
    """Mean categorical cross-entropy of probability rows against class indices."""
    return nll_rows(log(probs), targets, class_weights)


def cross_entropy_logits(logits: Tensor, targets: Sequence[int], class_weights=None) -> Tensor:
    """Same contract as :func:`cross_entropy` applied to ``softmax_rows(logits)``,
    computed through log-softmax for stability."""
    return nll_rows(log_softmax_rows(logits), targets, class_weights)


def take_rows(x: Tensor, index) -> Tensor:
    x = const(x)
    idx = np.asarray(index, dtype=np.int64)
    shape = x.shape

    def back(g):
        out = np.zeros(shape)
        np.add.at(out, idx, g)
        return (out,)

    return Tensor(x.value[idx], (x,), back)


def slice_rows(x: Tensor, start: int, stop: int) -> Tensor:
    x = const(x)
    shape = x.shape

    def back(g):
        out = np.zeros(shape)
        out[start:stop] = g
        return (out,)

    return Tensor(x.value[start:stop], (x,), back)


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    parts = [const(p) for p in parts]
    bounds = np.cumsum([0] + [p.rows for p in parts])
    out = np.vstack([p.value for p in parts])

    def back(g):
        return tuple(g[bounds[i] : bounds[i + 1]] for i in range(len(parts)))

    return Tensor(out, tuple(parts), back)


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    parts = [const(p) for p in parts]
    bounds = np.cumsum([0] + [p.cols for p in parts])
    out = np.hstack([p.value for p in parts])

    def back(g):
        return tuple(g[:, bounds[i] : bounds[i + 1]] for i in range(len(parts)))

    return Tensor(out, tuple(parts), back)


def scatter_matrix(weights: Tensor, rows, cols, weight_index, shape: tuple) -> Tensor:
    """Dense matrix with ``out[rows[e], cols[e]] = weights[weight_index[e]]``.

    Target cells must be distinct. ``weights`` is a flat vector (or a single
    row/column) of shared scalars.
    """
    weights = const(weights)
    r = np.asarray(rows, dtype=np.int64)
    c = np.asarray(cols, dtype=np.int64)
    k = np.asarray(weight_index, dtype=np.int64)
    wv = weights.value.reshape(-1)
    out = np.zeros(shape)
    out[r, c] = wv[k]
    wshape = weights.shape

    def back(g):
        gw = np.bincount(k, weights=g[r, c], minlength=wv.size)
        return (gw.reshape(wshape),)

    return Tensor(out, (weights,), back)


def fc_layer(
    x: Tensor,
    theta: Tensor,
    bias: Tensor,
    slope: float = 0.01,
    rate: float = 0.0,
    training: bool = False,
    seed=None,
) -> Tensor:
    """``dropout(leaky_relu(x @ theta + bias))``."""
    return dropout(leaky_relu(add(matmul(x, theta), bias), slope), rate, training, seed)


# ---------------------------------------------------------------------------
# reverse sweep


def _topological(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(param) into ``param.grad`` for every reachable Param."""
    if loss.value.size != 1:
        raise ShapeError(f"backward() needs a scalar, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.value)}
    for node in reversed(_topological(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if isinstance(node, Param):
            node.grad = node.grad + g.reshape(node.value.shape)
        if node.backward_fn is None:
            continue
        for parent, pg in zip(node.parents, node.backward_fn(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = grads[key] + pg if key in grads else pg


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class AdamW:
    """Adam with decoupled weight decay.

    value <- value - lr * m_hat / (sqrt(v_hat) + eps) - lr * weight_decay * value,
    with the decay term skipped for params created with ``decay=False``.
    """

    params: list[Param]
    lr: float = 1e-3
    weight_decay: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def __post_init__(self):
        self.params = list(self.params)
        for p in self.params:
            self.m.setdefault(p.name, np.zeros_like(p.value))
            self.v.setdefault(p.name, np.zeros_like(p.value))

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1**t
        c2 = 1.0 - self.beta2**t
        for p in self.params:
            g = p.grad
            m = self.beta1 * self.m[p.name] + (1.0 - self.beta1) * g
            v = self.beta2 * self.v[p.name] + (1.0 - self.beta2) * g * g
            self.m[p.name], self.v[p.name] = m, v
            update = self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            if p.decay:
                update = update + self.lr * self.weight_decay * p.value
            p.value = p.value - update


# ---------------------------------------------------------------------------
# finite-difference checking


@dataclass
class GradCheckReport:
    max_error: float
    worst_param: str
    worst_index: tuple
    analytic: float
    numeric: float
    checked: int
    tol: float
    per_param: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tol

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status} max_rel_error={self.max_error:.3e} over {self.checked} coords "
            f"(worst {self.worst_param}{list(self.worst_index)}: "
            f"analytic={self.analytic:.6e} numeric={self.numeric:.6e})"
        )


def _compare(a: float, n: float) -> float:
    if abs(a) < 1e-8:
        return abs(a - n)
    return abs(a - n) / max(abs(a), abs(n))


def grad_check(
    closure: Callable[[], Tensor],
    params: Iterable[Param],
    h: float = 1e-5,
    tol: float = 1e-4,
    analytic: dict | None = None,
) -> GradCheckReport:
    """Compare analytic gradients with central differences on every coordinate.

    ``closure`` must rebuild the forward graph from current param values and be
    deterministic. ``analytic`` overrides the computed gradients (name -> array),
    which is how a corrupted-gradient negative control is expressed.
    """
    params = list(params)
    for p in params:
        p.zero_grad()
    backward(closure())
    grads = {p.name: p.grad.copy() for p in params}
    if analytic is not None:
        grads.update({k: np.asarray(v, dtype=np.float64) for k, v in analytic.items()})

    worst = (-1.0, "", (), 0.0, 0.0)
    per_param = {}
    checked = 0
    for p in params:
        base = p.value
        pmax = 0.0
        for idx in np.ndindex(base.shape):
            bumped = base.copy()
            bumped[idx] = base[idx] + h
            p.value = bumped
            fp = closure().item()
            bumped = base.copy()
            bumped[idx] = base[idx] - h
            p.value = bumped
            fm = closure().item()
            p.value = base
            num = (fp - fm) / (2.0 * h)
            ana = float(grads[p.name][idx])
            err = _compare(ana, num)
            checked += 1
            pmax = max(pmax, err)
            if err > worst[0]:
                worst = (err, p.name, idx, ana, num)
        per_param[p.name] = pmax
    return GradCheckReport(
        max_error=max(worst[0], 0.0),
        worst_param=worst[1],
        worst_index=tuple(int(i) for i in worst[2]),
        analytic=worst[3],
        numeric=worst[4],
        checked=checked,
        tol=tol,
        per_param=per_param,
    )


# ---------------------------------------------------------------------------
# checkpoints


def save_params(params: Iterable[Param], path) -> None:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "params": {
            p.name: {"shape": list(p.value.shape), "values": p.value.reshape(-1).tolist()}
            for p in params
        },
    }
    Path(path).write_text(json.dumps(payload))


def load_params(path) -> dict[str, np.ndarray]:
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a parameter checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {payload.get('version')}")
    out = {}
    for name, entry in payload["params"].items():
        shape = tuple(entry["shape"])
        values = np.asarray(entry["values"], dtype=np.float64)
        if values.size != math.prod(shape):
            raise ValueError(f"{path}: {name} has {values.size} values for shape {shape}")
        out[name] = values.reshape(shape)
    return out
