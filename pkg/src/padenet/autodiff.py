"""Reverse-mode differentiation over the fixed operator set used by the model:
conv, elementwise power/abs/divide, add, activations, dense affine, pooling,
dropout masking, softmax and cross-entropy.

The graph is built eagerly per batch. Each `Var` wraps one ndarray and records
its parents plus a backward closure; `backward()` topologically orders the
graph, seeds d(loss) = 1 and accumulates gradients into the leaves. A
finite-difference verifier (`grad_check`) is included.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from . import numerics
from .errors import NumericError, ShapeError

_grad_enabled = True


class no_grad:
    """Context manager: nodes created inside do not track gradients."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


class Var:
    """One node of the computation graph.

    Leaves are inputs (needs_grad=False) or parameters (needs_grad=True).
    Interior nodes keep references to their parents and a closure mapping the
    node's output gradient to parent gradients.
    """

    __slots__ = ("data", "grad", "name", "needs_grad", "_parents", "_backward")

    def __init__(self, data, name: str | None = None, needs_grad: bool = False):
        self.data = np.asarray(data)
        self.grad: np.ndarray | None = None
        self.name = name
        self.needs_grad = needs_grad
        self._parents: tuple[Var, ...] = ()
        self._backward: Callable | None = None

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        tag = self.name or "var"
        return f"Var({tag}, shape={self.data.shape})"


def param(data, name: str) -> Var:
    """Named trainable leaf."""
    return Var(np.asarray(data), name=name, needs_grad=True)


def _node(data, parents: Sequence[Var], backward: Callable, name: str | None = None) -> Var:
    out = Var(data, name=name)
    if _grad_enabled and any(p.needs_grad for p in parents):
        out.needs_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def as_var(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


# ---------------------------------------------------------------------------
# operator set


def add_n(terms: Sequence[Var]) -> Var:
    """Sum of same-shaped tensors as a single node."""
    terms = list(terms)
    if len(terms) == 1:
        return terms[0]
    data = terms[0].data.copy()
    for t in terms[1:]:
        if t.data.shape != data.shape:
            raise ShapeError(f"add_n shapes differ: {t.data.shape} vs {data.shape}")
        data += t.data
    return _node(data, terms, lambda g: tuple(g for _ in terms), "add_n")


def add_scalar(x: Var, c: float) -> Var:
    return _node(x.data + c, (x,), lambda g: (g,), "add_scalar")


def scale(x: Var, c: float) -> Var:
    return _node(x.data * c, (x,), lambda g: (g * c,), "scale")


def power_int(x: Var, m: int) -> Var:
    """Elementwise integer power, m >= 1. d(x^m)/dx = m * x^(m-1)."""
    if m < 1:
        raise ValueError(f"power_int requires m >= 1, got {m}")
    if m == 1:
        return x
    xd = x.data

    def back(g):
        return (g * (m * np.power(xd, m - 1)),)

    return _node(np.power(xd, m), (x,), back, f"pow{m}")


def abs_(x: Var) -> Var:
    """Elementwise |x|; the subgradient at 0 is taken as 0 (sign(0) = 0)."""
    xd = x.data
    return _node(np.abs(xd), (x,), lambda g: (g * np.sign(xd),), "abs")


def div(a: Var, b: Var) -> Var:
    """Elementwise a / b (same shapes)."""
    if a.data.shape != b.data.shape:
        raise ShapeError(f"div shapes differ: {a.data.shape} vs {b.data.shape}")
    out = a.data / b.data
    bd = b.data

    def back(g):
        ga = g / bd
        return (ga, -ga * out)

    return _node(out, (a, b), back, "div")


def conv1d(x: Var, w: Var, bias: Var | None = None, name: str = "conv1d") -> Var:
    """Same-padded correlation node; see numerics.conv1d_same for semantics.

    The window matrix is cached on the closure for the kernel adjoint. The
    input adjoint is skipped when the input does not require gradients
    (always true for the first layer's raw signal).
    """
    out_data, cols = numerics._conv_forward(x.data, w.data)
    if bias is not None:
        out_data += bias.data
    x_needs = x.needs_grad

    def back(g):
        dw = numerics._conv_backward_w(cols, g)
        dx = numerics._conv_backward_x(g, w.data) if x_needs else None
        if bias is not None:
            return (dx, dw, g.sum(axis=(0, 1)))
        return (dx, dw)

    parents = (x, w) if bias is None else (x, w, bias)
    return _node(out_data, parents, back, name)


def maxpool1d(x: Var, pool: int = 2) -> Var:
    """Max pooling node; gradient routes to the first maximum in each window."""
    xd = x.data
    B, M, C = xd.shape
    if M < pool:
        raise ShapeError(f"input length {M} is shorter than pool size {pool}")
    M2 = M // pool
    xw = xd[:, : M2 * pool, :].reshape(B, M2, pool, C)
    idx = xw.argmax(axis=2)
    out = np.take_along_axis(xw, idx[:, :, None, :], axis=2)[:, :, 0, :]

    def back(g):
        dxw = np.zeros_like(xw)
        np.put_along_axis(dxw, idx[:, :, None, :], g[:, :, None, :], axis=2)
        dx = np.zeros_like(xd)
        dx[:, : M2 * pool, :] = dxw.reshape(B, M2 * pool, C)
        return (dx,)

    return _node(out, (x,), back, "maxpool1d")


def affine(x: Var, w: Var, b: Var, name: str = "affine") -> Var:
    """Dense map x @ w + b for rank-2 x."""
    if x.data.ndim != 2:
        raise ShapeError(f"affine input must be rank 2, got shape {x.data.shape}")
    if x.data.shape[1] != w.data.shape[0]:
        raise ShapeError(
            f"affine expects {w.data.shape[0]} input features, got {x.data.shape[1]}"
        )
    out = x.data @ w.data + b.data
    x_needs = x.needs_grad

    def back(g):
        dx = g @ w.data.T if x_needs else None
        return (dx, x.data.T @ g, g.sum(axis=0))

    return _node(out, (x, w, b), back, name)


def reshape(x: Var, shape) -> Var:
    orig = x.data.shape
    return _node(x.data.reshape(shape), (x,), lambda g: (g.reshape(orig),), "reshape")


def tanh(x: Var) -> Var:
    out = np.tanh(x.data)
    return _node(out, (x,), lambda g: (g * (1.0 - out * out),), "tanh")


def leaky_relu(x: Var, slope: float = 0.01) -> Var:
    xd = x.data
    pos = xd >= 0
    out = np.where(pos, xd, slope * xd)

    def back(g):
        return (np.where(pos, g, slope * g),)

    return _node(out, (x,), back, "leaky_relu")


def mul_mask(x: Var, mask: np.ndarray) -> Var:
    """Multiply by a constant mask (dropout)."""
    return _node(x.data * mask, (x,), lambda g: (g * mask,), "mul_mask")


def softmax(z: Var) -> Var:
    """Row-wise softmax over the last axis, computed with max subtraction."""
    zd = z.data
    e = np.exp(zd - zd.max(axis=-1, keepdims=True))
    out = e / e.sum(axis=-1, keepdims=True)

    def back(g):
        dot = (g * out).sum(axis=-1, keepdims=True)
        return (out * (g - dot),)

    return _node(out, (z,), back, "softmax")


def cross_entropy(probs: Var, onehot: np.ndarray, clamp: float = 1e-12) -> Var:
    """Mean over the batch of -ln p(true class); p clamped at `clamp` before ln."""
    p = probs.data
    if p.shape != onehot.shape:
        raise ShapeError(f"probs shape {p.shape} != labels shape {onehot.shape}")
    B = p.shape[0]
    clipped = np.maximum(p, clamp)
    loss = -(onehot * np.log(clipped)).sum() / B

    def back(g):
        dp = np.where(p > clamp, -onehot / clipped, 0.0) * (g / B)
        return (dp.astype(p.dtype),)

    return _node(np.asarray(loss), (probs,), back, "cross_entropy")


def sum_squares(x: Var) -> Var:
    """Scalar sum of squared entries (L2 penalty building block)."""
    xd = x.data
    return _node(np.asarray((xd * xd).sum()), (x,), lambda g: (g * 2.0 * xd,), "sum_squares")


def mean_(x: Var) -> Var:
    n = x.data.size
    return _node(np.asarray(x.data.mean()), (x,), lambda g: (np.full_like(x.data, g / n),), "mean")


def sum_(x: Var) -> Var:
    return _node(np.asarray(x.data.sum()), (x,), lambda g: (np.full_like(x.data, g),), "sum")


# ---------------------------------------------------------------------------
# engine


def _toposort(root: Var) -> list[Var]:
    order: list[Var] = []
    seen: set[int] = set()
    stack: list[tuple[Var, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
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


def backward(loss: Var, params: Iterable[Var] | None = None, check_finite: bool = False):
    """Accumulates d(loss)/d(leaf) for every reachable leaf.

    Returns a dict mapping each requested parameter to its gradient array;
    parameters the loss does not depend on map to zero arrays. Gradients are
    recomputed from scratch on every call (repeated calls are identical).

    Raises:
        ShapeError: loss is not a scalar.
        NumericError: loss is non-finite, or (with check_finite) a propagated
            gradient contains NaN/Inf; the message names the offending node.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    if not np.isfinite(loss.data):
        raise NumericError(f"loss is not finite: {float(loss.data)}")

    order = _toposort(loss)
    for node in order:
        node.grad = None
    loss.grad = np.ones_like(loss.data)

    for node in reversed(order):
        if node._backward is None or node.grad is None:
            continue
        grads = node._backward(node.grad)
        for parent, g in zip(node._parents, grads):
            if g is None or not parent.needs_grad:
                continue
            if check_finite and not np.all(np.isfinite(g)):
                raise NumericError(
                    f"non-finite gradient flowing into node {parent.name or parent!r} "
                    f"from {node.name or node!r}"
                )
            parent.grad = g if parent.grad is None else parent.grad + g

    if params is None:
        return None
    out = {}
    for p in params:
        out[p] = p.grad.copy() if p.grad is not None else np.zeros_like(p.data)
    return out


def grad_check(loss_fn: Callable[[], Var], params: Sequence[Var], eps: float = 1e-5) -> float:
    """Max relative error between backward() and central finite differences.

    `loss_fn` must rebuild the graph from the current parameter values on each
    call (any internal randomness must be frozen). Error per component is
    |analytic - numeric| / max(|analytic|, |numeric|, 1e-12).
    """
    grads = backward(loss_fn(), params)

    def eval_loss() -> float:
        v = float(loss_fn().data)
        if not np.isfinite(v):
            raise NumericError("loss became non-finite during finite differencing")
        return v

    max_err = 0.0
    for p in params:
        flat = p.data.reshape(-1)
        gflat = grads[p].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = eval_loss()
            flat[i] = orig - eps
            f_minus = eval_loss()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps)
            err = abs(gflat[i] - numeric) / max(abs(gflat[i]), abs(numeric), 1e-12)
            max_err = max(max_err, err)
    return max_err
