import numpy as np
import pytest
from support import identity_conv_spec, random_conv_spec

from mcsr.errors import ConfigError
from mcsr.oracles import bilinear_reference, conv2d_reference, conv_transpose2d_reference
from mcsr.tensor_ops import (ConvSpec, bicubic_upsample, bilinear_upsample, conv2d,
                             conv_transpose2d, instance_norm, layer_norm, softmax)


class TestConv2d:
    def test_zero_input_any_weights(self):
        rng = np.random.default_rng(0)
        spec = ConvSpec(1, 1, 1, rng.standard_normal((1, 1, 3, 3)), np.zeros(1))
        out = conv2d(np.zeros((1, 4, 4)), spec)
        assert out.shape == (1, 4, 4)
        assert np.all(out == 0.0)

    def test_identity_kernel(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((3, 6, 7))
        assert np.array_equal(conv2d(x, identity_conv_spec(3)), x)

    @pytest.mark.parametrize("stride", [1, 2])
    def test_matches_brute_force_oracle(self, stride):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((2, 5, 5))
        spec = random_conv_spec(rng, 2, 4, stride)
        want = conv2d_reference(x, spec.weights, spec.bias, stride)
        assert np.max(np.abs(conv2d(x, spec) - want)) <= 1e-6

    @pytest.mark.parametrize("size,stride,expected", [(8, 1, 8), (8, 2, 4), (7, 2, 4), (5, 2, 3)])
    def test_stride_size_rule(self, size, stride, expected):
        rng = np.random.default_rng(3)
        out = conv2d(np.zeros((1, size, size)), random_conv_spec(rng, 1, 1, stride))
        assert out.shape == (1, expected, expected)

    def test_channel_mismatch_raises(self):
        rng = np.random.default_rng(4)
        with pytest.raises(ConfigError):
            conv2d(np.zeros((3, 4, 4)), random_conv_spec(rng, 2, 2))

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((3, 9, 9))
        spec = random_conv_spec(rng, 3, 3)
        assert np.array_equal(conv2d(x, spec), conv2d(x, spec))


class TestConvTranspose2d:
    def test_zero_input(self):
        rng = np.random.default_rng(10)
        spec = random_conv_spec(rng, 1, 1, stride=2, transposed=True)
        out = conv_transpose2d(np.zeros((1, 2, 2)), ConvSpec(1, 1, 2, spec.weights, np.zeros(1)))
        assert out.shape == (1, 4, 4)
        assert np.all(out == 0.0)

    def test_output_shape_doubles(self):
        rng = np.random.default_rng(11)
        spec = random_conv_spec(rng, 1, 1, stride=2, transposed=True)
        assert conv_transpose2d(np.zeros((1, 3, 3)), spec).shape == (1, 6, 6)

    def test_adjoint_identity_shared_weights(self):
        # 100 random shapes: <conv2d(x), y> == <x, conv_transpose2d(y)> when
        # both ops are handed the same weight array.
        rng = np.random.default_rng(12)
        for _ in range(100):
            c_in = int(rng.integers(1, 4))
            c_out = int(rng.integers(1, 4))
            h = int(rng.integers(1, 7)) * 2
            w = int(rng.integers(1, 7)) * 2
            weights = rng.standard_normal((c_out, c_in, 3, 3))
            x = rng.standard_normal((c_in, h, w))
            y = rng.standard_normal((c_out, h // 2, w // 2))
            fwd = conv2d(x, ConvSpec(c_in, c_out, 2, weights, np.zeros(c_out)))
            back = conv_transpose2d(y, ConvSpec(c_out, c_in, 2, weights, np.zeros(c_in)))
            lhs = float(np.sum(fwd * y))
            rhs = float(np.sum(x * back))
            assert abs(lhs - rhs) <= 1e-5 * max(abs(lhs), abs(rhs), 1.0)

    def test_matches_scatter_oracle(self):
        rng = np.random.default_rng(13)
        x = rng.standard_normal((3, 4, 5))
        spec = random_conv_spec(rng, 3, 2, stride=2, transposed=True)
        want = conv_transpose2d_reference(x, spec.weights, spec.bias)
        assert np.max(np.abs(conv_transpose2d(x, spec) - want)) <= 1e-6

    def test_requires_stride_two(self):
        rng = np.random.default_rng(14)
        with pytest.raises(ConfigError):
            conv_transpose2d(np.zeros((1, 2, 2)), random_conv_spec(rng, 1, 1, 1, transposed=True))

    def test_channel_mismatch_raises(self):
        rng = np.random.default_rng(15)
        with pytest.raises(ConfigError):
            conv_transpose2d(np.zeros((3, 2, 2)), random_conv_spec(rng, 2, 2, 2, transposed=True))


class TestBilinearUpsample:
    def test_factor_one_identity(self):
        rng = np.random.default_rng(20)
        x = rng.standard_normal((2, 5, 4))
        assert np.array_equal(bilinear_upsample(x, 1), x)

    @pytest.mark.parametrize("factor", [2, 3, 4])
    def test_constant_preserved(self, factor):
        x = np.full((2, 3, 3), 0.7)
        assert np.allclose(bilinear_upsample(x, factor), 0.7, atol=1e-12)

    def test_two_by_two_against_oracle(self):
        x = np.array([[[0.0, 1.0], [2.0, 3.0]]])
        got = bilinear_upsample(x, 2)
        want = bilinear_reference(x, 2)
        assert np.max(np.abs(got - want)) <= 1e-6

    def test_random_against_oracle(self):
        rng = np.random.default_rng(21)
        x = rng.standard_normal((3, 4, 5))
        for factor in (2, 3):
            assert np.max(np.abs(bilinear_upsample(x, factor) - bilinear_reference(x, factor))) <= 1e-6

    def test_bounds_preserved(self):
        rng = np.random.default_rng(22)
        for _ in range(100):
            x = rng.standard_normal((2, int(rng.integers(2, 6)), int(rng.integers(2, 6))))
            out = bilinear_upsample(x, int(rng.integers(2, 5)))
            assert out.min() >= x.min() - 1e-6
            assert out.max() <= x.max() + 1e-6


class TestBicubicUpsample:
    def test_constant_preserved(self):
        assert np.allclose(bicubic_upsample(np.full((4, 4), 0.3), 4), 0.3, atol=1e-12)

    def test_factor_one_identity(self):
        rng = np.random.default_rng(23)
        x = rng.standard_normal((5, 5))
        assert np.array_equal(bicubic_upsample(x, 1), x)

    def test_shape(self):
        assert bicubic_upsample(np.zeros((6, 7)), 2).shape == (12, 14)


class TestInstanceNorm:
    def test_constant_channel_zeroed(self):
        out = instance_norm(np.full((2, 4, 4), 3.5))
        assert np.all(out == 0.0)

    def test_symmetric_channel(self):
        x = np.array([[[-1.0, 1.0]]])
        assert np.max(np.abs(instance_norm(x) - x)) <= 1e-4

    def test_random_statistics(self):
        rng = np.random.default_rng(30)
        out = instance_norm(rng.standard_normal((3, 8, 8)))
        assert np.max(np.abs(out.mean(axis=(1, 2)))) <= 1e-5
        assert np.max(np.abs(out.std(axis=(1, 2)) - 1.0)) <= 1e-4

    def test_idempotent_up_to_epsilon(self):
        rng = np.random.default_rng(31)
        once = instance_norm(rng.standard_normal((3, 8, 8)))
        twice = instance_norm(once)
        assert np.max(np.abs(twice - once)) <= 1e-4


class TestLayerNorm:
    def test_constant_token(self):
        out = layer_norm(np.array([[2.0, 2.0]]), np.ones(2), np.zeros(2))
        assert np.allclose(out, 0.0)

    def test_zero_gain_replicates_bias(self):
        rng = np.random.default_rng(32)
        bias = np.array([1.0, -2.0, 0.5])
        out = layer_norm(rng.standard_normal((4, 3)), np.zeros(3), bias)
        assert np.array_equal(out, np.tile(bias, (4, 1)))

    def test_random_statistics_before_affine(self):
        rng = np.random.default_rng(33)
        out = layer_norm(rng.standard_normal((4, 8)), np.ones(8), np.zeros(8))
        assert np.max(np.abs(out.mean(axis=1))) <= 1e-5
        assert np.max(np.abs(out.std(axis=1) - 1.0)) <= 1e-4


class TestSoftmax:
    def test_uniform_row(self):
        assert np.array_equal(softmax(np.zeros((1, 4))), np.full((1, 4), 0.25))

    def test_large_values_stable(self):
        out = softmax(np.array([[1000.0, 1000.0]]))
        assert np.array_equal(out, np.array([[0.5, 0.5]]))
        assert np.all(np.isfinite(out))

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(34)
        out = softmax(rng.standard_normal((50, 7)) * 50)
        assert np.max(np.abs(out.sum(axis=1) - 1.0)) <= 1e-6

    def test_masked_logits_underflow_cleanly(self):
        out = softmax(np.array([[0.0, -1e9, -1e9, 0.0]]))
        assert np.array_equal(out, np.array([[0.5, 0.0, 0.0, 0.5]]))

    def test_deterministic(self):
        rng = np.random.default_rng(35)
        x = rng.standard_normal((10, 10))
        assert np.array_equal(softmax(x), softmax(x))
