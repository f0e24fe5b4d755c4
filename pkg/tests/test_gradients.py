"""Finite-difference checks of every differentiable primitive (64-bit)."""

import numpy as np
import pytest

from groupnets import tensor as T
from groupnets.gradcheck import away_from_kinks, check_gradients, numerical_grad, untied

SEEDS = range(8)


def rand(rng, shape, kink_safe=False):
    a = rng.standard_normal(shape)
    return away_from_kinks(a) if kink_safe else a


class TestElementwiseGrads:
    @pytest.mark.parametrize("seed", SEEDS)
    def test_add_mul_sub(self, seed):
        rng = np.random.default_rng(seed)
        a, b = rand(rng, (2, 3, 4, 4)), rand(rng, (2, 3, 4, 4))
        v = rand(rng, (1, 3, 1, 1))
        check_gradients(
            lambda a, b, v: T.sum_all(T.mul(T.add(T.mul(a, b), T.sub(a, v)), a)),
            lambda a, b, v: ((a * b + (a - v)) * a).sum(),
            [a, b, v])

    @pytest.mark.parametrize("seed", SEEDS)
    def test_relu(self, seed):
        rng = np.random.default_rng(seed)
        a = rand(rng, (3, 2, 5, 5), kink_safe=True)
        check_gradients(
            lambda a: T.sum_all(T.mul(T.relu(a), a)),
            lambda a: (np.maximum(a, 0) * a).sum(),
            [a])

    @pytest.mark.parametrize("seed", SEEDS)
    def test_sigmoid(self, seed):
        rng = np.random.default_rng(seed)
        a = rand(rng, (2, 8))
        check_gradients(
            lambda a: T.sum_all(T.mul(T.sigmoid(a), T.sigmoid(a))),
            lambda a: ((1 / (1 + np.exp(-a))) ** 2).sum(),
            [a])


class TestConvGrads:
    @pytest.mark.parametrize("seed", SEEDS)
    def test_conv2d_gemm(self, seed):
        rng = np.random.default_rng(seed)
        x = rand(rng, (2, 3, 5, 5))
        w = rand(rng, (4, 3, 3, 3))

        def np_fn(x, w):
            return T.conv2d(T.Tensor(x, dtype=np.float64), T.Tensor(w, dtype=np.float64),
                            method="gemm").data.sum()

        check_gradients(
            lambda x, w: T.sum_all(T.conv2d(x, w, method="gemm")),
            np_fn, [x, w])

    @pytest.mark.parametrize("seed", range(4))
    def test_conv2d_fft(self, seed):
        rng = np.random.default_rng(seed)
        x = rand(rng, (2, 2, 9, 9))
        w = rand(rng, (3, 2, 7, 7))

        def np_fn(x, w):
            return T.conv2d(T.Tensor(x, dtype=np.float64), T.Tensor(w, dtype=np.float64),
                            method="fft").data.sum()

        check_gradients(
            lambda x, w: T.sum_all(T.conv2d(x, w, method="fft")),
            np_fn, [x, w])

    @pytest.mark.parametrize("seed", range(4))
    def test_conv2d_strided(self, seed):
        rng = np.random.default_rng(seed)
        x = rand(rng, (2, 2, 8, 8))
        w = rand(rng, (3, 2, 4, 4))

        def np_fn(x, w):
            return T.conv2d(T.Tensor(x, dtype=np.float64), T.Tensor(w, dtype=np.float64),
                            stride=2).data.sum()

        check_gradients(
            lambda x, w: T.sum_all(T.conv2d(x, w, stride=2)),
            np_fn, [x, w])

    @pytest.mark.parametrize("seed", range(4))
    def test_conv2d_transpose(self, seed):
        rng = np.random.default_rng(seed)
        x = rand(rng, (2, 3, 4, 4))
        w = rand(rng, (3, 2, 4, 4))

        def np_fn(x, w):
            y = T.conv2d_transpose(T.Tensor(x, dtype=np.float64), T.Tensor(w, dtype=np.float64)).data
            return (y * y).sum() / 2

        check_gradients(
            lambda x, w: T.mul(T.sum_all(T.mul(T.conv2d_transpose(x, w), T.conv2d_transpose(x, w))), 0.5),
            np_fn, [x, w])


class TestPoolGrads:
    @pytest.mark.parametrize("seed", range(4))
    def test_maxpool2(self, seed):
        rng = np.random.default_rng(seed)
        x = untied(rand(rng, (2, 2, 6, 6)), rng)

        def np_fn(x):
            y = T.maxpool2(T.Tensor(x, dtype=np.float64)).data
            return (y * y).sum()

        check_gradients(
            lambda x: T.sum_all(T.mul(T.maxpool2(x), T.maxpool2(x))),
            np_fn, [x])

    @pytest.mark.parametrize("seed", range(4))
    def test_global_max_pool(self, seed):
        rng = np.random.default_rng(seed)
        x = untied(rand(rng, (2, 3, 5, 5)), rng)

        def np_fn(x):
            return T.global_max_pool(T.Tensor(x, dtype=np.float64)).data.sum()

        check_gradients(
            lambda x: T.sum_all(T.global_max_pool(x)),
            np_fn, [x])


class TestBatchNormGrads:
    @pytest.mark.parametrize("seed", range(4))
    def test_train_mode_x_scale_bias(self, seed):
        rng = np.random.default_rng(seed)
        x = rand(rng, (4, 3, 4, 4))
        scale = rand(rng, (3,))
        bias = rand(rng, (3,))

        def run(xt, st_scale, st_bias, mode="train"):
            st = T.BatchNormState(3, dtype=np.float64)
            st.scale = st_scale if isinstance(st_scale, T.Tensor) else T.Tensor(st_scale, dtype=np.float64)
            st.bias = st_bias if isinstance(st_bias, T.Tensor) else T.Tensor(st_bias, dtype=np.float64)
            return T.batchnorm(xt, st, mode)

        def np_fn(x, scale, bias):
            y = run(T.Tensor(x, dtype=np.float64), scale, bias).data
            return (y * np.sin(np.arange(y.size)).reshape(y.shape)).sum()

        weights = np.sin(np.arange(x.size * 1)).reshape(4, 3, 4, 4)

        check_gradients(
            lambda x, s, b: T.sum_all(T.mul(run(x, s, b), T.Tensor(weights, dtype=np.float64))),
            np_fn, [x, scale, bias])


class TestLossGrad:
    @pytest.mark.parametrize("seed", range(4))
    def test_bce(self, seed):
        rng = np.random.default_rng(seed)
        z = rand(rng, (16,))
        y = rng.integers(0, 2, 16).astype(np.float64)

        def np_fn(z):
            return float(T.bce_with_logits(T.Tensor(z, dtype=np.float64), y).data)

        check_gradients(lambda z: T.bce_with_logits(z, y), np_fn, [z])


class TestAdam:
    def test_zero_gradient_keeps_params(self):
        from groupnets.optim import AdamState, adam_step
        p = T.Tensor(np.array([1.0, -2.0]), requires_grad=True, dtype=np.float64)
        st = AdamState(lr=0.1)
        adam_step({"p": p}, {"p": np.zeros(2)}, st)
        assert np.array_equal(p.data, [1.0, -2.0])

    def test_first_step_definition_beta_zero(self):
        from groupnets.optim import AdamState, adam_step
        g = np.array([0.5, -3.0])
        p = T.Tensor(np.array([1.0, 1.0]), requires_grad=True, dtype=np.float64)
        st = AdamState(lr=0.01, beta1=0.0, beta2=0.0, eps=1e-8)
        adam_step({"p": p}, {"p": g}, st)
        expect = 1.0 - 0.01 * g / (np.abs(g) + 1e-8)
        assert np.allclose(p.data, expect, rtol=1e-12)

    def test_quadratic_convergence(self):
        from groupnets.optim import AdamState, adam_step
        # f(p) = 0.5*(p - target)' A (p - target), A diagonal
        target = np.array([0.3, -1.2])
        scale = np.array([2.0, 0.5])
        p = T.Tensor(np.zeros(2), requires_grad=True, dtype=np.float64)
        st = AdamState(lr=1e-2)
        for _ in range(5000):
            g = scale * (p.data - target)
            adam_step({"p": p}, {"p": g}, st)
            if np.abs(p.data - target).max() < 1e-6:
                break
        assert np.abs(p.data - target).max() < 1e-6

    def test_shape_mismatch_rejected(self):
        from groupnets.optim import AdamState, adam_step
        p = T.Tensor(np.zeros(2), requires_grad=True)
        with pytest.raises(ValueError):
            adam_step({"p": p}, {"p": np.zeros(3)}, AdamState())
