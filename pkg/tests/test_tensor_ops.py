"""Forward semantics of the tensor primitives."""

import numpy as np
import pytest

from groupnets import tensor as T


def t64(a):
    return T.Tensor(np.asarray(a, dtype=np.float64))


class TestElementwise:
    def test_relu_negative_is_zero(self):
        assert T.relu(t64([-1.0])).data[0] == 0.0

    def test_sigmoid_zero_is_half(self):
        assert T.sigmoid(t64([0.0])).data[0] == 0.5

    def test_add_mul_broadcast_channel_vector(self):
        x = t64(np.ones((2, 3, 4, 4)))
        v = T.channel_vector(t64([1.0, 2.0, 3.0]))
        y = T.mul(x, v)
        assert np.allclose(y.data[:, 1], 2.0)
        z = T.add(x, v)
        assert np.allclose(z.data[:, 2], 4.0)

    def test_incompatible_broadcast_raises(self):
        x = t64(np.ones((2, 3, 4, 4)))
        v = t64(np.ones((1, 5, 1, 1)))
        with pytest.raises(ValueError):
            T.mul(x, v)


class TestConv2d:
    def test_identity_kernel(self):
        rng = np.random.default_rng(0)
        x = t64(rng.standard_normal((2, 1, 5, 5)))
        w = t64(np.ones((1, 1, 1, 1)))
        y = T.conv2d(x, w)
        assert np.array_equal(y.data, x.data)

    def test_zero_input_zero_output(self):
        x = t64(np.zeros((1, 3, 6, 6)))
        w = t64(np.random.default_rng(1).standard_normal((4, 3, 3, 3)))
        assert np.all(T.conv2d(x, w).data == 0)

    def test_channel_mismatch_raises(self):
        x = t64(np.zeros((1, 3, 6, 6)))
        w = t64(np.zeros((4, 2, 3, 3)))
        with pytest.raises(ValueError):
            T.conv2d(x, w)

    def test_same_padding_preserves_size(self):
        x = t64(np.random.default_rng(2).standard_normal((2, 2, 9, 7)))
        w = t64(np.random.default_rng(3).standard_normal((5, 2, 3, 3)))
        assert T.conv2d(x, w).data.shape == (2, 5, 9, 7)

    def test_fft_and_gemm_paths_agree(self):
        rng = np.random.default_rng(4)
        x = t64(rng.standard_normal((2, 3, 16, 16)))
        w = t64(rng.standard_normal((4, 3, 7, 7)))
        a = T.conv2d(x, w, method="gemm").data
        b = T.conv2d(x, w, method="fft").data
        assert np.allclose(a, b, rtol=1e-10, atol=1e-10)

    def test_reference_cross_correlation(self):
        # direct loop reference on a small case
        rng = np.random.default_rng(5)
        x = rng.standard_normal((1, 2, 5, 5))
        w = rng.standard_normal((3, 2, 3, 3))
        y = T.conv2d(t64(x), t64(w)).data
        xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
        ref = np.zeros((1, 3, 5, 5))
        for o in range(3):
            for i in range(2):
                for r in range(3):
                    for c in range(3):
                        ref[0, o] += xp[0, i, r:r + 5, c:c + 5] * w[o, i, r, c]
        assert np.allclose(y, ref, atol=1e-12)


class TestConvTranspose:
    def test_zero_input_zero_output(self):
        x = t64(np.zeros((1, 2, 4, 4)))
        w = t64(np.random.default_rng(0).standard_normal((2, 3, 4, 4)))
        assert np.all(T.conv2d_transpose(x, w).data == 0)

    def test_stride2_doubles_spatial(self):
        x = t64(np.random.default_rng(1).standard_normal((1, 1, 2, 2)))
        w = t64(np.random.default_rng(2).standard_normal((1, 1, 4, 4)))
        assert T.conv2d_transpose(x, w, stride=2).data.shape == (1, 1, 4, 4)

    @pytest.mark.parametrize("seed", range(5))
    def test_adjoint_identity(self, seed):
        rng = np.random.default_rng(seed)
        x = t64(rng.standard_normal((2, 3, 8, 8)))
        y = t64(rng.standard_normal((2, 5, 4, 4)))
        w = t64(rng.standard_normal((5, 3, 4, 4)))
        lhs = float((T.conv2d(x, w, stride=2).data * y.data).sum())
        rhs = float((x.data * T.conv2d_transpose(y, w, stride=2).data).sum())
        assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0)


class TestPooling:
    def test_maxpool_constant(self):
        x = t64(np.full((1, 1, 4, 4), 3.25))
        y = T.maxpool2(x)
        assert y.data.shape == (1, 1, 2, 2)
        assert np.all(y.data == 3.25)

    def test_maxpool_block_definition(self):
        x = t64(np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2))
        assert T.maxpool2(x).data.reshape(-1)[0] == 4.0

    def test_maxpool_odd_replicate(self):
        x = t64(np.arange(9, dtype=np.float64).reshape(1, 1, 3, 3))
        y = T.maxpool2(x)
        assert y.data.shape == (1, 1, 2, 2)
        assert y.data[0, 0, 1, 1] == 8.0

    def test_global_max_pool_constant_and_hot(self):
        x = np.zeros((1, 1, 5, 5))
        assert T.global_max_pool(t64(x + 2.5)).data.reshape(()) == 2.5
        x[0, 0, 3, 1] = 7.0
        assert T.global_max_pool(t64(x)).data.reshape(()) == 7.0


class TestBatchNorm:
    def test_normalized_input_fixed_point(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((64, 3, 8, 8))
        x = (x - x.mean(axis=(0, 2, 3), keepdims=True)) / x.std(axis=(0, 2, 3), keepdims=True)
        st = T.BatchNormState(3, eps=1e-12, dtype=np.float64)
        y = T.batchnorm(T.Tensor(x, dtype=np.float64), st, "train")
        assert np.allclose(y.data, x, atol=1e-6)

    def test_zero_scale_gives_bias(self):
        st = T.BatchNormState(2, dtype=np.float64)
        st.scale.data[:] = 0.0
        st.bias.data[:] = [1.5, -2.0]
        y = T.batchnorm(t64(np.random.default_rng(1).standard_normal((4, 2, 3, 3))), st, "train")
        assert np.allclose(y.data[:, 0], 1.5) and np.allclose(y.data[:, 1], -2.0)

    def test_eval_mode_is_affine(self):
        st = T.BatchNormState(2, dtype=np.float64)
        rng = np.random.default_rng(2)
        T.batchnorm(t64(rng.standard_normal((8, 2, 4, 4))), st, "train")
        a = rng.standard_normal((3, 2, 4, 4))
        b = rng.standard_normal((3, 2, 4, 4))
        f = lambda z: T.batchnorm(t64(z), st, "eval").data
        assert np.allclose(f(2.0 * a + b), 2.0 * f(a) + f(b) - 2.0 * f(np.zeros_like(a)), atol=1e-9)

    def test_running_stats_update(self):
        st = T.BatchNormState(1, momentum=0.1, dtype=np.float64)
        x = np.full((4, 1, 2, 2), 10.0)
        T.batchnorm(t64(x), st, "train")
        assert np.isclose(st.running_mean[0], 1.0)  # 0.9*0 + 0.1*10
        assert np.isclose(st.running_var[0], 0.9)   # 0.9*1 + 0.1*0

    def test_empty_batch_rejected(self):
        st = T.BatchNormState(1)
        with pytest.raises(ValueError):
            T.batchnorm(T.Tensor(np.zeros((0, 1, 2, 2))), st, "train")


class TestLoss:
    def test_logit_zero_label_one_is_log2(self):
        l = T.bce_with_logits(t64([0.0]), np.array([1.0]))
        assert np.isclose(l.data, np.log(2.0))

    def test_perfect_large_margin(self):
        logits = t64([30.0, -30.0])
        l = T.bce_with_logits(logits, np.array([1.0, 0.0]))
        assert l.data < 1e-6

    def test_matches_direct_formula(self):
        rng = np.random.default_rng(3)
        z = rng.standard_normal(64) * 3
        y = rng.integers(0, 2, 64).astype(np.float64)
        l = T.bce_with_logits(t64(z), y).data
        p = 1.0 / (1.0 + np.exp(-z))
        ref = -(y * np.log(p) + (1 - y) * np.log(1 - p)).mean()
        assert np.isclose(l, ref, rtol=1e-10)

    def test_label_out_of_domain(self):
        with pytest.raises(ValueError):
            T.bce_with_logits(t64([0.0]), np.array([2.0]))


class TestSerialization:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        for dtype in (np.float32, np.float64):
            a = rng.standard_normal((3, 4, 5)).astype(dtype)
            p = tmp_path / f"t_{dtype.__name__}.bin"
            T.save_tensor(p, a)
            b = T.load_tensor(p)
            assert b.dtype == a.dtype and np.array_equal(a, b)

    def test_bad_magic_rejected(self, tmp_path):
        p = tmp_path / "bad.bin"
        p.write_bytes(b"NOTMAGIC" + b"\x00" * 16)
        with pytest.raises(ValueError):
            T.load_tensor(p)


class TestBackwardBasics:
    def test_sum_gradient_is_ones(self):
        p = T.Tensor(np.random.default_rng(0).standard_normal((3, 4)), requires_grad=True, dtype=np.float64)
        with T.Tape() as tape:
            loss = T.sum_all(p)
            T.backward(tape, loss)
        assert np.array_equal(p.grad, np.ones((3, 4)))

    def test_half_sum_square_gradient_is_p(self):
        rng = np.random.default_rng(1)
        p = T.Tensor(rng.standard_normal((5,)), requires_grad=True, dtype=np.float64)
        with T.Tape() as tape:
            loss = T.mul(T.sum_all(T.mul(p, p)), 0.5)
            T.backward(tape, loss)
        assert np.allclose(p.grad, p.data, atol=1e-12)

    def test_non_scalar_loss_rejected(self):
        p = T.Tensor(np.ones(3), requires_grad=True)
        with T.Tape() as tape:
            y = T.mul(p, 2.0)
            with pytest.raises(ValueError):
                T.backward(tape, y)

    def test_no_tape_means_pure_forward(self):
        p = T.Tensor(np.ones(3), requires_grad=True)
        y = T.mul(p, 2.0)
        assert y.requires_grad is False

    def test_determinism_same_inputs_same_outputs(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((2, 3, 12, 12)).astype(np.float32)
        w = rng.standard_normal((4, 3, 7, 7)).astype(np.float32)
        a = T.conv2d(T.Tensor(x), T.Tensor(w)).data
        b = T.conv2d(T.Tensor(x.copy()), T.Tensor(w.copy())).data
        assert np.array_equal(a, b)
