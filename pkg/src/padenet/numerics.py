"""Array primitives: seeded randomness and the two sliding-window kernels
(same-padded correlation, non-overlapping max pooling) every layer builds on.

Arrays are plain numpy ndarrays laid out (batch, length, channels). float64 is
the reference precision; float32 is supported as a fast mode. All functions
are pure: inputs are never mutated.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, ShapeError

_KEY_MASK = (1 << 64) - 1


class RngStream:
    """Deterministic random stream backed by the Philox counter-based generator.

    Identical (seed, stream) pairs produce identical draw sequences on every
    platform. Distinct ``stream`` ids derive independent streams from one seed
    (used to separate init / shuffle / dropout / noise consumers). A stream is
    single-owner: do not share one instance across threads.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        key = (self.seed & _KEY_MASK) | ((self.stream & _KEY_MASK) << 64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def uniform(self, lo: float, hi: float, size) -> np.ndarray:
        """Draws in [lo, hi); advances the stream state."""
        if not lo < hi:
            raise ValueError(f"uniform range requires lo < hi, got [{lo}, {hi})")
        return self._gen.uniform(lo, hi, size)

    def normal(self, mean: float, std: float, size) -> np.ndarray:
        return self._gen.normal(mean, std, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def child(self, stream: int) -> "RngStream":
        """New independent stream with the same seed and a different id."""
        return RngStream(self.seed, stream)


def _check_rank3(x: np.ndarray, what: str) -> None:
    if x.ndim != 3:
        raise ShapeError(f"{what} must be rank 3 (batch, length, channels), got shape {x.shape}")


def _im2col(x: np.ndarray, K: int) -> np.ndarray:
    """Zero-padded window matrix: (B, M, Cin) -> (B, M, K, Cin)."""
    B, M, C = x.shape
    pad = K // 2
    xp = np.pad(x, ((0, 0), (pad, pad), (0, 0)))
    cols = np.empty((B, M, K, C), dtype=x.dtype)
    for k in range(K):
        cols[:, :, k, :] = xp[:, k : k + M, :]
    return cols


def _kernel_matrix(w: np.ndarray) -> np.ndarray:
    """(Cin, Cout, K) -> contiguous (K*Cin, Cout) matching _im2col's layout."""
    Ci, Co, K = w.shape
    return np.ascontiguousarray(w.transpose(2, 0, 1).reshape(K * Ci, Co))


def _conv_forward(x: np.ndarray, w: np.ndarray):
    """Core correlation; returns (out, cols) so the adjoint can reuse cols."""
    B, M, Ci = x.shape
    Co = w.shape[1]
    K = w.shape[2]
    cols = _im2col(x, K)
    out = cols.reshape(B * M, K * Ci) @ _kernel_matrix(w)
    return out.reshape(B, M, Co), cols


def _conv_backward_w(cols: np.ndarray, g: np.ndarray) -> np.ndarray:
    """d(out)/d(kernel) adjoint: cols (B,M,K,Ci), g (B,M,Co) -> (Ci,Co,K)."""
    B, M, K, Ci = cols.shape
    Co = g.shape[-1]
    dw2 = cols.reshape(B * M, K * Ci).T @ g.reshape(B * M, Co)
    return np.ascontiguousarray(dw2.reshape(K, Ci, Co).transpose(1, 2, 0))


def _conv_backward_x(g: np.ndarray, w: np.ndarray) -> np.ndarray:
    """d(out)/d(input) adjoint: scatter g @ W^T back over the input windows."""
    B, M, Co = g.shape
    Ci, _, K = w.shape
    pad = K // 2
    dcols = (g.reshape(B * M, Co) @ _kernel_matrix(w).T).reshape(B, M, K, Ci)
    dxp = np.zeros((B, M + 2 * pad, Ci), dtype=g.dtype)
    for k in range(K):
        dxp[:, k : k + M, :] += dcols[:, :, k, :]
    return dxp[:, pad : pad + M, :]


def conv1d_same(x: np.ndarray, kernels: np.ndarray, bias: np.ndarray | None = None) -> np.ndarray:
    """Same-padded, stride-1 correlation (no kernel flip).

    out[b, m, o] = sum_{i, k} kernels[i, o, k] * x[b, m + k - K//2, i]
    with zero padding outside [0, M). K must be odd so the window is centred.

    Args:
        x: (B, M, Cin) input.
        kernels: (Cin, Cout, K) kernel bank.
        bias: optional (Cout,) added to every output position.
    """
    x = np.asarray(x)
    w = np.asarray(kernels)
    _check_rank3(x, "conv1d_same input")
    if w.ndim != 3:
        raise ShapeError(f"kernel bank must be (Cin, Cout, K), got shape {w.shape}")
    K = w.shape[2]
    if K < 1 or K % 2 == 0:
        raise ConfigError(f"kernel size must be odd and >= 1, got K={K}")
    if w.shape[0] != x.shape[2]:
        raise ShapeError(
            f"kernel bank expects {w.shape[0]} input channels, input has {x.shape[2]}"
        )
    if bias is not None:
        bias = np.asarray(bias)
        if bias.shape != (w.shape[1],):
            raise ShapeError(f"bias must have shape ({w.shape[1]},), got {bias.shape}")
    out, _ = _conv_forward(x, w)
    if bias is not None:
        out += bias
    return out


def maxpool1d(x: np.ndarray, pool: int = 2) -> np.ndarray:
    """Non-overlapping max pooling along the length axis, stride = pool.

    Output length is floor(M / pool); trailing remainder samples are dropped.
    """
    x = np.asarray(x)
    _check_rank3(x, "maxpool1d input")
    B, M, C = x.shape
    if pool < 1:
        raise ConfigError(f"pool size must be >= 1, got {pool}")
    if M < pool:
        raise ShapeError(f"input length {M} is shorter than pool size {pool}")
    M2 = M // pool
    return x[:, : M2 * pool, :].reshape(B, M2, pool, C).max(axis=2)
