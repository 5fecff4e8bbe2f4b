"""Network layers: rational-kernel (Pade) 1D convolutions and the supporting
activation / pooling / flatten / dropout / dense pieces.

A Pade layer of orders (P, Q) computes, per output channel,

    N = sum_{m=1..P} conv1d_same(x^m, w_pm) + b_m
    D = 1 + sum_{n=1..Q} |conv1d_same(x^n, w_qn)|
    y = N / D

with elementwise input powers taken before convolution and the absolute value
applied per order term, so D >= 1 everywhere and the output is bounded by |N|.
P=1, Q=0 reduces exactly to a biased convolution; Q=0 with P>=2 is the
polynomial (generative) special case. Denominator kernels carry no bias.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, ShapeError
from .numerics import RngStream

ACTIVATION_KINDS = ("tanh", "leaky_relu")
LEAKY_SLOPE = 0.01


def glorot_limit(fan_in: int, fan_out: int) -> float:
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


class PadeConv1D:
    """Same-padded rational convolution layer with P numerator and Q
    denominator kernel banks.

    Numerator banks are Glorot-uniform initialised with zero biases;
    denominator banks start uniform in [-0.01, 0.01] so the layer begins close
    to its Q=0 reduction.
    """

    def __init__(
        self,
        cin: int,
        cout: int,
        kernel: int = 7,
        p: int = 1,
        q: int = 0,
        name: str = "pade",
        rng: RngStream | None = None,
        dtype=np.float64,
    ):
        if p < 1:
            raise ConfigError(f"numerator order must be >= 1, got P={p}")
        if q < 0:
            raise ConfigError(f"denominator order must be >= 0, got Q={q}")
        if kernel < 1 or kernel % 2 == 0:
            raise ConfigError(f"kernel size must be odd and >= 1, got {kernel}")
        self.cin, self.cout, self.kernel = cin, cout, kernel
        self.p, self.q = p, q
        self.name = name
        rng = rng or RngStream(0)
        lim = glorot_limit(cin * kernel, cout * kernel)
        self.num_kernels = [
            ad.param(
                rng.uniform(-lim, lim, (cin, cout, kernel)).astype(dtype),
                f"{name}/num{m}/kernel",
            )
            for m in range(1, p + 1)
        ]
        self.num_biases = [
            ad.param(np.zeros(cout, dtype=dtype), f"{name}/num{m}/bias")
            for m in range(1, p + 1)
        ]
        self.den_kernels = [
            ad.param(
                rng.uniform(-0.01, 0.01, (cin, cout, kernel)).astype(dtype),
                f"{name}/den{n}/kernel",
            )
            for n in range(1, q + 1)
        ]

    def forward(self, x: ad.Var) -> ad.Var:
        if x.data.shape[-1] != self.cin:
            raise ShapeError(
                f"{self.name} expects {self.cin} input channels, got {x.data.shape[-1]}"
            )
        num_terms = [
            ad.conv1d(ad.power_int(x, m + 1), w, b, name=f"{self.name}/num{m + 1}")
            for m, (w, b) in enumerate(zip(self.num_kernels, self.num_biases))
        ]
        num = ad.add_n(num_terms)
        if self.q == 0:
            return num
        den_terms = [
            ad.abs_(ad.conv1d(ad.power_int(x, n + 1), w, name=f"{self.name}/den{n + 1}"))
            for n, w in enumerate(self.den_kernels)
        ]
        den = ad.add_scalar(ad.add_n(den_terms), 1.0)
        return ad.div(num, den)

    def params(self) -> list[ad.Var]:
        out = []
        for w, b in zip(self.num_kernels, self.num_biases):
            out += [w, b]
        out += self.den_kernels
        return out

    def kernel_params(self) -> list[ad.Var]:
        """Kernel banks only (the L2 regularisation targets); biases excluded."""
        return self.num_kernels + self.den_kernels

    def param_count(self) -> int:
        return self.p * (self.cin * self.cout * self.kernel + self.cout) + self.q * (
            self.cin * self.cout * self.kernel
        )


def generative_forward(layer: PadeConv1D, x: ad.Var) -> ad.Var:
    """Polynomial special case: requires Q=0; identical to layer.forward."""
    if layer.q != 0:
        raise ConfigError(f"generative layer requires Q=0, got Q={layer.q}")
    return layer.forward(x)


class Activation:
    def __init__(self, kind: str):
        if kind not in ACTIVATION_KINDS:
            raise ConfigError(f"unknown activation {kind!r}, expected one of {ACTIVATION_KINDS}")
        self.kind = kind
        self.name = kind

    def forward(self, x: ad.Var) -> ad.Var:
        if self.kind == "tanh":
            return ad.tanh(x)
        return ad.leaky_relu(x, LEAKY_SLOPE)

    def params(self):
        return []


class MaxPool1D:
    def __init__(self, pool: int = 2, name: str = "maxpool"):
        self.pool = pool
        self.name = name

    def forward(self, x: ad.Var) -> ad.Var:
        return ad.maxpool1d(x, self.pool)

    def params(self):
        return []


class Flatten:
    """Row-major flatten of (B, M, C) to (B, M*C)."""

    def __init__(self, name: str = "flatten"):
        self.name = name

    def forward(self, x: ad.Var) -> ad.Var:
        B = x.data.shape[0]
        return ad.reshape(x, (B, -1))

    def params(self):
        return []


class Dropout:
    """Inverted dropout: training zeroes each element with probability `rate`
    and scales survivors by 1/(1-rate); evaluation is the identity."""

    def __init__(self, rate: float, name: str = "dropout"):
        if not 0.0 <= rate < 1.0:
            raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.name = name

    def forward(self, x: ad.Var, train: bool = False, rng: RngStream | None = None) -> ad.Var:
        if not train or self.rate == 0.0:
            return x
        if rng is None:
            raise ConfigError("training-mode dropout requires an RngStream")
        keep = (rng.uniform(0.0, 1.0, x.data.shape) >= self.rate).astype(x.data.dtype)
        mask = keep / (1.0 - self.rate)
        return ad.mul_mask(x, mask)

    def params(self):
        return []

    def make_mask(self, shape, rng: RngStream, dtype=np.float64) -> np.ndarray:
        """Frozen mask for gradient checking."""
        keep = (rng.uniform(0.0, 1.0, shape) >= self.rate).astype(dtype)
        return keep / (1.0 - self.rate)


class Dense:
    """Affine map with optional tanh / softmax head."""

    def __init__(
        self,
        fin: int,
        fout: int,
        activation: str | None = None,
        name: str = "dense",
        rng: RngStream | None = None,
        dtype=np.float64,
    ):
        if activation not in (None, "tanh", "softmax"):
            raise ConfigError(f"unsupported dense activation {activation!r}")
        self.fin, self.fout = fin, fout
        self.activation = activation
        self.name = name
        rng = rng or RngStream(0)
        lim = glorot_limit(fin, fout)
        self.weight = ad.param(rng.uniform(-lim, lim, (fin, fout)).astype(dtype), f"{name}/weight")
        self.bias = ad.param(np.zeros(fout, dtype=dtype), f"{name}/bias")

    def forward(self, x: ad.Var) -> ad.Var:
        out = ad.affine(x, self.weight, self.bias, name=self.name)
        if self.activation == "tanh":
            return ad.tanh(out)
        if self.activation == "softmax":
            return ad.softmax(out)
        return out

    def params(self) -> list[ad.Var]:
        return [self.weight, self.bias]

    def param_count(self) -> int:
        return self.fin * self.fout + self.fout
