"""Finite-difference verification harnesses used by tests and the gradcheck
CLI command.

Central differences with step eps are only meaningful away from the model's
kinks (the |.| in the denominator, leaky_relu corners, pooling ties): a draw
is accepted only if every such site is at least `guard` away from its kink,
where guard is sized to dominate the eps-perturbation of any single
parameter. Rejected draws are resampled, mirroring the stated exclusion of
near-zero denominator terms.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Var, grad_check
from .errors import ConfigError
from .model import ModelConfig, build_model
from .numerics import RngStream
from .training import STREAM_INIT, cross_entropy_loss, one_hot

DEFAULT_GUARD = 1e-4


def _graph_margin(loss: Var) -> float:
    """Smallest distance to a non-smooth point over the loss graph."""
    margin = np.inf
    for node in ad._toposort(loss):
        name = node.name or ""
        if "/den" in name:  # pre-|.| denominator conv term
            margin = min(margin, float(np.abs(node.data).min()))
        elif name == "leaky_relu":
            margin = min(margin, float(np.abs(node._parents[0].data).min()))
        elif name == "maxpool1d":
            xd = node._parents[0].data
            B, M, C = xd.shape
            M2 = M // 2
            xw = xd[:, : M2 * 2, :].reshape(B, M2, 2, C)
            margin = min(margin, float(np.abs(xw[:, :, 0, :] - xw[:, :, 1, :]).min()))
    return margin


def network_grad_check(
    p: int = 2,
    q: int = 1,
    activation: str = "tanh",
    n_seeds: int = 20,
    length: int = 32,
    blocks: int = 2,
    filters: int = 4,
    kernel: int = 3,
    dense_units: int = 8,
    classes: int = 8,
    batch: int = 2,
    eps: float = 1e-5,
    guard: float = DEFAULT_GUARD,
    l2_lambda: float = 1e-3,
) -> float:
    """Max relative gradient error of the full toy network over `n_seeds`
    accepted random draws (double precision)."""
    cfg = ModelConfig(
        p=p,
        q=q,
        activation=activation,
        filters=filters,
        kernel=kernel,
        blocks=blocks,
        dense_units=dense_units,
        classes=classes,
        dropout=0.0,
        l2_lambda=l2_lambda,
        input_length=length,
        input_channels=1,
    )
    worst = 0.0
    accepted = 0
    attempt = 0
    while accepted < n_seeds:
        attempt += 1
        if attempt > 20 * n_seeds:
            raise ConfigError("could not find enough kink-free draws; lower `guard`")
        data_rng = RngStream(attempt, 777)
        model = build_model(cfg, RngStream(attempt, STREAM_INIT), dtype=np.float64)
        # the near-zero denominator init hugs the |.| kink; verify at random
        # parameters drawn wide of it instead
        for layer in model.layers:
            for w in getattr(layer, "den_kernels", []):
                w.data = data_rng.uniform(-0.5, 0.5, w.data.shape)
        x = data_rng.uniform(-1.0, 1.0, (batch, length, 1))
        labels = (data_rng.uniform(0.0, 1.0, batch) * classes).astype(np.int64)
        onehot = one_hot(labels, classes)
        kernels = model.kernel_params()

        def loss_fn():
            probs = model.forward(Var(x), train=False)
            return cross_entropy_loss(probs, onehot, kernels, l2_lambda)

        if _graph_margin(loss_fn()) < guard:
            continue
        worst = max(worst, grad_check(loss_fn, model.params(), eps=eps))
        accepted += 1
    return worst


def _accepted_draw(make_loss, params, guard: float, max_attempts: int = 200):
    """Calls make_loss(attempt) until the graph is kink-free; returns loss_fn."""
    for attempt in range(1, max_attempts + 1):
        loss_fn = make_loss(attempt)
        if _graph_margin(loss_fn()) >= guard:
            return loss_fn
    raise ConfigError("no kink-free draw found")


def layer_grad_checks(eps: float = 1e-5, guard: float = DEFAULT_GUARD) -> dict[str, float]:
    """Max relative error for each layer type in isolation (plus the losses),
    each on a fresh random draw away from kinks."""
    from .layers import Activation, Dense, Dropout, MaxPool1D, PadeConv1D

    results: dict[str, float] = {}

    def pade_case(p, q, label, kernel=3, cin=1, cout=2, m=8, batch=2):
        def make_loss(attempt):
            rng = RngStream(attempt, 101)
            layer = PadeConv1D(cin, cout, kernel=kernel, p=p, q=q, rng=rng, name="lyr")
            # spread denominator kernels wider than the init so terms clear the guard
            for w in layer.den_kernels:
                w.data = rng.uniform(-1.0, 1.0, w.data.shape)
            x = rng.uniform(0.2, 1.0, (batch, m, cin))
            params = layer.params()

            def loss_fn():
                return ad.mean_(layer.forward(Var(x)))

            loss_fn.params = params
            return loss_fn

        loss_fn = _accepted_draw(make_loss, None, guard)
        results[label] = grad_check(loss_fn, loss_fn.params, eps=eps)

    pade_case(2, 1, "pade_p2_q1")
    pade_case(1, 0, "conv_p1_q0", m=12, cout=3)
    pade_case(3, 0, "generative_p3_q0")
    pade_case(1, 2, "pade_p1_q2")

    def simple_case(label, build):
        def make_loss(attempt):
            return build(RngStream(attempt, 202))

        loss_fn = _accepted_draw(make_loss, None, guard)
        results[label] = grad_check(loss_fn, loss_fn.params, eps=eps)

    def build_dense(rng):
        dense = Dense(6, 4, activation="softmax", name="d", rng=rng)
        x = rng.uniform(-1.0, 1.0, (3, 6))
        onehot = one_hot((rng.uniform(0, 1, 3) * 4).astype(np.int64), 4)

        def loss_fn():
            return cross_entropy_loss(dense.forward(Var(x)), onehot)

        loss_fn.params = dense.params()
        return loss_fn

    simple_case("dense_softmax_ce", build_dense)

    def build_dense_tanh(rng):
        dense = Dense(5, 3, activation="tanh", name="d", rng=rng)
        x = rng.uniform(-1.0, 1.0, (2, 5))

        def loss_fn():
            return ad.mean_(dense.forward(Var(x)))

        loss_fn.params = dense.params()
        return loss_fn

    simple_case("dense_tanh", build_dense_tanh)

    def build_act_pool(rng):
        layer = PadeConv1D(1, 2, kernel=3, p=1, q=0, rng=rng, name="c")
        act = Activation("leaky_relu")
        pool = MaxPool1D(2)
        x = rng.uniform(-1.0, 1.0, (2, 10, 1))

        def loss_fn():
            return ad.mean_(pool.forward(act.forward(layer.forward(Var(x)))))

        loss_fn.params = layer.params()
        return loss_fn

    simple_case("leaky_relu_maxpool", build_act_pool)

    def build_tanh_pool(rng):
        layer = PadeConv1D(1, 2, kernel=3, p=1, q=0, rng=rng, name="c")
        act = Activation("tanh")
        pool = MaxPool1D(2)
        x = rng.uniform(-1.0, 1.0, (2, 10, 1))

        def loss_fn():
            return ad.mean_(pool.forward(act.forward(layer.forward(Var(x)))))

        loss_fn.params = layer.params()
        return loss_fn

    simple_case("tanh_maxpool", build_tanh_pool)

    def build_dropout(rng):
        dense = Dense(6, 4, activation=None, name="d", rng=rng)
        drop = Dropout(0.25)
        mask = drop.make_mask((2, 4), rng)
        x = rng.uniform(-1.0, 1.0, (2, 6))

        def loss_fn():
            return ad.mean_(ad.mul_mask(dense.forward(Var(x)), mask))

        loss_fn.params = dense.params()
        return loss_fn

    simple_case("dropout_frozen_mask", build_dropout)

    return results
