"""Tests for the sliding-window primitives and the seeded RNG."""

import numpy as np
import pytest

from padenet.errors import ConfigError, ShapeError
from padenet.numerics import RngStream, conv1d_same, maxpool1d


def conv_reference(x, w, bias=None):
    """Brute-force sliding-window correlation with explicit zero padding."""
    B, M, Ci = x.shape
    _, Co, K = w.shape
    pad = K // 2
    out = np.zeros((B, M, Co))
    for b in range(B):
        for m in range(M):
            for o in range(Co):
                acc = 0.0
                for i in range(Ci):
                    for k in range(K):
                        t = m + k - pad
                        if 0 <= t < M:
                            acc += w[i, o, k] * x[b, t, i]
                out[b, m, o] = acc + (bias[o] if bias is not None else 0.0)
    return out


def pool_reference(x, pool):
    B, M, C = x.shape
    M2 = M // pool
    out = np.zeros((B, M2, C))
    for b in range(B):
        for m in range(M2):
            for c in range(C):
                out[b, m, c] = max(x[b, m * pool + j, c] for j in range(pool))
    return out


class TestConv1dSame:
    def test_edge_detector_example(self):
        x = np.array([1.0, 2.0, 3.0]).reshape(1, 3, 1)
        w = np.array([1.0, 0.0, -1.0]).reshape(1, 1, 3)
        out = conv1d_same(x, w)
        np.testing.assert_allclose(out.ravel(), [-2.0, -2.0, 2.0])

    def test_impulse_kernel_is_identity(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(2, 17, 3))
        w = np.zeros((3, 3, 3))
        for c in range(3):
            w[c, c, 1] = 1.0
        np.testing.assert_array_equal(conv1d_same(x, w), x)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(1)
        for K in (1, 3, 5, 7):
            x = rng.normal(size=(2, 11, 2))
            w = rng.normal(size=(2, 4, K))
            b = rng.normal(size=4)
            np.testing.assert_allclose(
                conv1d_same(x, w, b), conv_reference(x, w, b), atol=1e-12
            )

    def test_output_shape_architecture_row(self):
        x = np.zeros((3, 1000, 1))
        w = np.zeros((1, 32, 7))
        assert conv1d_same(x, w).shape == (3, 1000, 32)

    def test_linearity(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(1, 20, 2))
        z = rng.normal(size=(1, 20, 2))
        w = rng.normal(size=(2, 3, 5))
        lhs = conv1d_same(2.5 * x - 1.25 * z, w)
        rhs = 2.5 * conv1d_same(x, w) - 1.25 * conv1d_same(z, w)
        denom = np.maximum(np.abs(rhs), 1e-12)
        assert np.max(np.abs(lhs - rhs) / denom) < 1e-10

    def test_even_kernel_rejected(self):
        with pytest.raises(ConfigError):
            conv1d_same(np.zeros((1, 8, 1)), np.zeros((1, 1, 4)))

    def test_channel_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            conv1d_same(np.zeros((1, 8, 2)), np.zeros((3, 1, 3)))

    def test_bad_bias_rejected(self):
        with pytest.raises(ShapeError):
            conv1d_same(np.zeros((1, 8, 1)), np.zeros((1, 2, 3)), bias=np.zeros(3))

    def test_rank_check(self):
        with pytest.raises(ShapeError):
            conv1d_same(np.zeros((8, 1)), np.zeros((1, 1, 3)))

    def test_finite_output_on_finite_input(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(2, 50, 4)) * 1e3
        w = rng.normal(size=(4, 8, 7))
        assert np.all(np.isfinite(conv1d_same(x, w)))


class TestMaxPool1d:
    def test_floor_drop_example(self):
        x = np.array([1.0, 3.0, 2.0, 5.0, 4.0]).reshape(1, 5, 1)
        np.testing.assert_array_equal(maxpool1d(x, 2).ravel(), [3.0, 5.0])

    def test_architecture_lengths(self):
        assert maxpool1d(np.zeros((1, 125, 32)), 2).shape == (1, 62, 32)
        assert maxpool1d(np.zeros((1, 15, 32)), 2).shape == (1, 7, 32)

    def test_constant_signal(self):
        x = np.full((2, 10, 3), 4.5)
        out = maxpool1d(x, 2)
        assert out.shape == (2, 5, 3)
        assert np.all(out == 4.5)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(4)
        for M in (2, 3, 9, 16, 31):
            x = rng.normal(size=(2, M, 3))
            np.testing.assert_array_equal(maxpool1d(x, 2), pool_reference(x, 2))

    def test_output_length_is_floor(self):
        for M in range(2, 40):
            assert maxpool1d(np.zeros((1, M, 1)), 2).shape[1] == M // 2

    def test_too_short_rejected(self):
        with pytest.raises(ShapeError):
            maxpool1d(np.zeros((1, 1, 1)), 2)


class TestRngStream:
    def test_same_seed_same_sequence(self):
        a = RngStream(123).uniform(0, 1, 10_000)
        b = RngStream(123).uniform(0, 1, 10_000)
        np.testing.assert_array_equal(a, b)

    def test_million_draw_determinism(self):
        a = RngStream(7).uniform(-1, 1, 1_000_000)
        b = RngStream(7).uniform(-1, 1, 1_000_000)
        np.testing.assert_array_equal(a, b)

    def test_streams_differ(self):
        a = RngStream(7, 0).uniform(0, 1, 100)
        b = RngStream(7, 1).uniform(0, 1, 100)
        assert not np.array_equal(a, b)

    def test_degenerate_range_rejected(self):
        with pytest.raises(ValueError):
            RngStream(0).uniform(1.0, 1.0, 4)
        with pytest.raises(ValueError):
            RngStream(0).uniform(2.0, -1.0, 4)

    def test_uniform_mean(self):
        draws = RngStream(11).uniform(2.0, 6.0, 100_000)
        assert abs(draws.mean() - 4.0) < 0.04  # 1% of the midpoint
        assert draws.min() >= 2.0 and draws.max() < 6.0

    def test_state_advances(self):
        s = RngStream(5)
        assert not np.array_equal(s.uniform(0, 1, 8), s.uniform(0, 1, 8))
