import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import central_difference
from vsqc import head as fc
from vsqc.head import HeadParams

finite = st.floats(-30, 30, allow_nan=False)


def params(k, f, w=0.0, b=0.0):
    return HeadParams(np.full((k, f), w), np.full(k, b))


class TestForwardBinary:
    def test_zero_params(self):
        p = fc.forward_binary(np.array([0.3, -0.2, 0.9]), params(1, 3))
        assert p.probabilities[0] == 0.5
        assert p.predicted_class == 1  # tie goes to class 1

    def test_unit_weight_zero_features(self):
        w = HeadParams(np.array([[1.0, 0.0, 0.0]]), np.array([0.0]))
        assert fc.forward_binary(np.zeros(3), w).probabilities[0] == 0.5

    def test_saturation(self):
        p = fc.forward_binary(np.array([1.0]), HeadParams(np.array([[15.0]]), np.array([5.0])))
        assert abs(p.probabilities[0] - 1.0) <= 1e-8

    def test_batch(self):
        out = fc.forward_binary(np.array([[1.0], [-1.0]]), HeadParams(np.array([[2.0]]), np.array([0.0])))
        np.testing.assert_array_equal(out.predicted_class, [1, 0])

    def test_dimension_mismatch(self):
        with pytest.raises(fc.HeadShapeError):
            fc.forward_binary(np.zeros(4), params(1, 3))

    def test_needs_single_output(self):
        with pytest.raises(fc.HeadShapeError):
            fc.forward_binary(np.zeros(3), params(2, 3))

    @settings(max_examples=100, deadline=None)
    @given(z=arrays(np.float64, st.integers(1, 20), elements=finite))
    def test_sigmoid_open_interval(self, z):
        s = fc.sigmoid(z)
        assert np.all((s > 0) & (s < 1))

    def test_sigmoid_extreme_no_overflow(self):
        with np.errstate(over="raise"):
            s = fc.sigmoid(np.array([-1000.0, 1000.0]))
        np.testing.assert_array_equal(s, [0.0, 1.0])


class TestForwardMulti:
    def test_uniform(self):
        np.testing.assert_allclose(fc.forward_multi(np.ones(4), params(3, 4)).probabilities, [1 / 3] * 3)

    def test_bias_dominance(self):
        p = HeadParams(np.zeros((3, 2)), np.array([10.0, 0.0, 0.0]))
        out = fc.forward_multi(np.ones(2), p)
        assert out.probabilities[0] >= 0.9999 and out.predicted_class == 0

    def test_tie_lowest_index(self):
        p = HeadParams(np.zeros((3, 2)), np.array([0.0, 1.0, 1.0]))
        assert fc.forward_multi(np.ones(2), p).predicted_class == 1

    @settings(max_examples=100, deadline=None)
    @given(z=arrays(np.float64, st.integers(2, 10), elements=finite), c=st.floats(-100, 100))
    def test_shift_invariance_and_simplex(self, z, c):
        a, b = fc.softmax(z), fc.softmax(z + c)
        np.testing.assert_allclose(a, b, atol=1e-12)
        assert abs(a.sum() - 1) <= 1e-12 and np.all(a >= 0)

    def test_needs_two_outputs(self):
        with pytest.raises(fc.HeadShapeError):
            fc.forward_multi(np.zeros(3), params(1, 3))


class TestLosses:
    def test_mse_zero(self):
        assert fc.mse_loss([0, 1, 1], [0, 1, 1]) == 0.0

    def test_mse_single(self):
        assert fc.mse_loss([0.5], [0]) == 0.125

    def test_mse_pair(self):
        assert fc.mse_loss([1, 0], [0, 1]) == 0.5

    def test_ce_perfect(self):
        assert fc.ce_loss(np.eye(3), np.eye(3)) == 0.0

    def test_ce_uniform(self):
        assert fc.ce_loss(np.full(3, 1 / 3), [1, 0, 0]) == pytest.approx(np.log(3))

    def test_ce_clamped(self):
        value = fc.ce_loss([0.0, 1.0, 0.0], [1, 0, 0])
        assert np.isfinite(value) and value == pytest.approx(-np.log(1e-12))

    @pytest.mark.parametrize("loss", [fc.mse_loss, fc.ce_loss])
    def test_empty(self, loss):
        with pytest.raises(fc.EmptyBatchError):
            loss(np.zeros((0, 3)) if loss is fc.ce_loss else [], np.zeros((0, 3)) if loss is fc.ce_loss else [])

    def test_length_mismatch(self):
        with pytest.raises(fc.HeadShapeError):
            fc.mse_loss([0.1, 0.2], [1])

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 8), k=st.integers(2, 5))
    def test_non_negative(self, seed, n, k):
        rng = np.random.default_rng(seed)
        assert fc.mse_loss(rng.random(n), rng.integers(0, 2, n)) >= 0
        probs = fc.softmax(rng.normal(size=(n, k)))
        assert fc.ce_loss(probs, np.eye(k)[rng.integers(0, k, n)]) >= 0


class TestGradients:
    def test_binary_zero_when_correct(self):
        o = np.array([0.2, -0.4])
        d_w, d_b, d_o = fc.grads_binary(o, params(1, 2, 0.3), 1.0, 1.0)
        assert np.all(d_w == 0) and d_b == 0 and np.all(d_o == 0)

    def test_binary_example(self):
        # y_hat = 0.5 with zero parameters; y = 0; o = [1]
        p = params(1, 1)
        d_w, d_b, _ = fc.grads_binary(np.array([1.0]), p, 0.5, 0.0)
        assert d_w[0] == 0.125 and d_b == 0.125

        def loss(w):
            y_hat = fc.forward_binary(np.array([1.0]), HeadParams(w, p.bias)).probabilities
            return fc.mse_loss(y_hat, [0])

        fd = central_difference(loss, p.weights, h=1e-6)
        # the half-MSE prefactor cancels the square: (y_hat - y) y_hat (1 - y_hat) o = 0.125
        assert fd[0, 0] == pytest.approx(0.125, abs=1e-8)

    def test_multi_zero_when_one_hot(self):
        d_w, d_b, d_o = fc.grads_multi(np.array([0.3, 0.1]), params(3, 2, 0.5), np.array([0.0, 1.0, 0.0]), 1)
        assert np.all(d_w == 0) and np.all(d_b == 0) and np.all(d_o == 0)

    def test_multi_example(self):
        o = np.array([1.0, 0.0, 0.0])
        _, d_b, _ = fc.grads_multi(o, params(3, 3), np.full(3, 1 / 3), 0)
        np.testing.assert_allclose(d_b, [-2 / 3, 1 / 3, 1 / 3])
        assert abs(d_b.sum()) <= 1e-15

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), k=st.integers(2, 6))
    def test_bias_gradient_sums_to_zero(self, seed, k):
        rng = np.random.default_rng(seed)
        p = fc.init_head(k, 4, rng, scale=2.0)
        o = rng.uniform(-1, 1, 4)
        probs = fc.forward_multi(o, p).probabilities
        _, d_b, _ = fc.grads_multi(o, p, probs, int(rng.integers(k)))
        assert abs(d_b.sum()) <= 1e-12

    def test_binary_matches_finite_difference(self):
        for seed in range(50):
            rng = np.random.default_rng(seed)
            o = rng.uniform(-1, 1, size=(6, 5))
            y = rng.integers(0, 2, 6)
            p = fc.init_head(1, 5, rng, scale=1.5)
            y_hat = fc.forward_binary(o, p).probabilities
            d_w, d_b, d_o = fc.grads_binary(o, p, y_hat, y)

            def loss(w=p.weights, b=p.bias, feats=o):
                return fc.mse_loss(fc.forward_binary(feats, HeadParams(w, b)).probabilities, y)

            assert np.max(np.abs(d_w - central_difference(lambda w: loss(w=w), p.weights)[0])) <= 1e-5
            assert abs(d_b - central_difference(lambda b: loss(b=b), p.bias)[0]) <= 1e-5
            assert np.max(np.abs(d_o - central_difference(lambda f: loss(feats=f), o))) <= 1e-5

    def test_multi_matches_finite_difference(self):
        for seed in range(50):
            rng = np.random.default_rng(seed)
            k = 3
            o = rng.uniform(-1, 1, size=(6, 5))
            labels = rng.integers(0, k, 6)
            p = fc.init_head(k, 5, rng, scale=1.5)
            y_hat = fc.forward_multi(o, p).probabilities
            d_w, d_b, d_o = fc.grads_multi(o, p, y_hat, labels)

            def loss(w=p.weights, b=p.bias, feats=o):
                return fc.ce_loss(fc.forward_multi(feats, HeadParams(w, b)).probabilities, np.eye(k)[labels])

            assert np.max(np.abs(d_w - central_difference(lambda w: loss(w=w), p.weights))) <= 1e-5
            assert np.max(np.abs(d_b - central_difference(lambda b: loss(b=b), p.bias))) <= 1e-5
            assert np.max(np.abs(d_o - central_difference(lambda f: loss(feats=f), o))) <= 1e-5

    def test_batch_is_mean_of_samples(self, rng):
        o = rng.uniform(-1, 1, size=(4, 3))
        labels = np.array([0, 2, 1, 2])
        p = fc.init_head(3, 3, rng, scale=1.0)
        y_hat = fc.forward_multi(o, p).probabilities
        d_w, d_b, d_o = fc.grads_multi(o, p, y_hat, labels)
        singles = [fc.grads_multi(o[i], p, y_hat[i], labels[i]) for i in range(4)]
        np.testing.assert_allclose(d_w, np.mean([s[0] for s in singles], axis=0), atol=1e-15)
        np.testing.assert_allclose(d_b, np.mean([s[1] for s in singles], axis=0), atol=1e-15)
        np.testing.assert_allclose(d_o, np.stack([s[2] for s in singles]) / 4, atol=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(fc.HeadShapeError):
            fc.grads_multi(np.zeros(2), params(3, 3), np.full(3, 1 / 3), 0)
        with pytest.raises(fc.HeadShapeError):
            fc.grads_binary(np.zeros(2), params(1, 3), 0.5, 1)


class TestHeadParams:
    def test_flatten_round_trip(self, rng):
        p = fc.init_head(3, 4, rng)
        q = HeadParams.unflatten(p.flatten(), 3, 4)
        np.testing.assert_array_equal(q.weights, p.weights)
        np.testing.assert_array_equal(q.bias, p.bias)
        assert p.flatten().shape == (15,)

    def test_unflatten_wrong_length(self):
        with pytest.raises(fc.HeadShapeError):
            HeadParams.unflatten(np.zeros(10), 3, 4)

    def test_bias_shape_checked(self):
        with pytest.raises(fc.HeadShapeError):
            HeadParams(np.zeros((2, 3)), np.zeros(3))

    def test_init_range(self, rng):
        p = fc.init_head(3, 50, rng)
        assert np.all(np.abs(p.weights) <= 0.1) and np.all(np.abs(p.bias) <= 0.1)
        assert p.is_finite()

    def test_is_finite(self):
        assert not HeadParams(np.array([[np.nan]]), np.array([0.0])).is_finite()
