import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from marvel.model import (
    Layer,
    Model,
    OptimizerConfig,
    SGD,
    forward,
    gradients,
    init_model,
    probabilities,
    weighted_ce_loss,
)

from brute import finite_difference_gradients


def linear_model(weights, bias, binary=False):
    return Model([Layer(np.asarray(weights, float), np.asarray(bias, float))], binary=binary)


def random_model(rng, d, hidden, out):
    sizes = [d, *hidden, out]
    return init_model(sizes, binary=(out == 1), rng=rng)


class TestForward:
    def test_identity_layer(self):
        m = linear_model(np.eye(2), [0.0, 0.0])
        assert np.allclose(forward(m, [[1.0, 2.0]]), [[1.0, 2.0]])

    def test_zero_weights_give_zero_logits(self):
        m = linear_model(np.zeros((3, 2)), np.zeros(3))
        assert np.array_equal(forward(m, [[5.0, -7.0], [1.0, 0.0]]), np.zeros((2, 3)))

    def test_relu_mlp_matches_hand_computation(self):
        w1 = np.array([[1.0, -1.0], [2.0, 0.5]])
        b1 = np.array([0.5, -3.0])
        w2 = np.array([[1.0, 2.0]])
        b2 = np.array([0.25])
        m = Model([Layer(w1, b1, "relu"), Layer(w2, b2)])
        x = np.array([[1.0, 2.0]])
        # hidden pre-activations: (1 - 2 + 0.5, 2 + 1 - 3) = (-0.5, 0.0)
        # relu -> (0, 0); output = 0.25
        assert np.allclose(forward(m, x), [[0.25]])
        x2 = np.array([[2.0, 1.0]])
        # pre: (2 - 1 + .5, 4 + .5 - 3) = (1.5, 1.5); out = 1.5 + 3.0 + 0.25
        assert np.allclose(forward(m, x2), [[4.75]])

    def test_dimension_mismatch_raises(self):
        m = linear_model(np.eye(2), [0.0, 0.0])
        with pytest.raises(ValueError):
            forward(m, np.ones((1, 3)))

    def test_deterministic(self):
        m = random_model(np.random.default_rng(1), 4, (8,), 3)
        X = np.random.default_rng(2).normal(size=(5, 4))
        assert np.array_equal(forward(m, X), forward(m, X))


class TestProbabilities:
    def test_binary_zero_logit_is_half(self):
        p = probabilities(np.array([[0.0]]))
        assert np.allclose(p, [[0.5, 0.5]])

    def test_uniform_logits_uniform_probs(self):
        p = probabilities(np.zeros((1, 3)))
        assert np.allclose(p, [[1 / 3] * 3])

    def test_binary_log3(self):
        p = probabilities(np.array([[np.log(3.0)]]))
        assert abs(p[0, 1] - 0.75) < 1e-12

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(0)
        p = probabilities(rng.normal(scale=30, size=(40, 5)))
        assert np.abs(p.sum(axis=1) - 1).max() < 1e-12

    @given(st.integers(0, 2**32 - 1), st.floats(-500, 500))
    @settings(max_examples=50, deadline=None)
    def test_shift_invariance(self, seed, shift):
        logits = np.random.default_rng(seed).normal(size=(6, 4))
        assert np.abs(
            probabilities(logits + shift) - probabilities(logits)
        ).max() < 1e-12

    def test_two_logit_softmax_matches_sigmoid(self):
        # class index 1 plays the +1 label, so p(+1) = sigmoid(f1 - f0)
        rng = np.random.default_rng(3)
        pair = rng.normal(size=(30, 2))
        merged = (pair[:, 1] - pair[:, 0])[:, None]
        assert np.abs(
            probabilities(pair)[:, 1] - probabilities(merged)[:, 1]
        ).max() < 1e-12

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            probabilities(np.array([[np.inf, 0.0]]))

    def test_extreme_logits_stay_finite(self):
        p = probabilities(np.array([[800.0, -800.0], [-800.0, 800.0]]))
        assert np.isfinite(p).all()


class TestWeightedCELoss:
    def test_perfectly_confident_instance_costs_nothing(self):
        # one logit large enough that p(label) == 1 to double precision
        loss = weighted_ce_loss(np.array([[60.0]]), np.array([1]), np.array([1.0]))
        assert loss == pytest.approx(0.0, abs=1e-20)

    def test_two_even_instances_cost_ln2(self):
        logits = np.array([[0.0], [0.0]])
        loss = weighted_ce_loss(logits, np.array([1, -1]), np.array([0.5, 0.5]))
        assert loss == pytest.approx(np.log(2.0), abs=1e-12)

    def test_zero_weight_masks_an_instance(self):
        logits = np.array([[2.0], [-5.0]])
        labels = np.array([1, 1])
        full = weighted_ce_loss(logits[:1], labels[:1], np.array([1.0]))
        masked = weighted_ce_loss(logits, labels, np.array([1.0, 0.0]))
        assert masked == pytest.approx(full, abs=1e-15)

    def test_uniform_weights_equal_mean_ce(self):
        rng = np.random.default_rng(5)
        logits = rng.normal(size=(8, 3))
        labels = rng.integers(0, 3, 8)
        per_instance = [
            weighted_ce_loss(logits[i : i + 1], labels[i : i + 1], np.array([1.0]))
            for i in range(8)
        ]
        uniform = weighted_ce_loss(logits, labels, np.full(8, 1 / 8))
        assert uniform == pytest.approx(np.mean(per_instance), abs=1e-12)

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            weighted_ce_loss(np.zeros((2, 1)), np.array([1, -1]), np.array([1.5, -0.5]))


class TestGradients:
    def test_one_hot_weights_reduce_to_single_instance(self):
        rng = np.random.default_rng(7)
        m = random_model(rng, 3, (4,), 2)
        X = rng.normal(size=(5, 3))
        labels = rng.integers(0, 2, 5)
        focused = gradients(m, X, labels, np.array([0, 0, 1.0, 0, 0]))
        alone = gradients(m, X[2:3], labels[2:3], np.array([1.0]))
        for (gw_a, gb_a), (gw_b, gb_b) in zip(focused, alone):
            assert np.allclose(gw_a, gw_b, atol=1e-14)
            assert np.allclose(gb_a, gb_b, atol=1e-14)

    def test_logistic_gradient_formula_for_linear_binary(self):
        # d loss / d w = w_j * (p(+1) - [y == +1]) * x per instance
        rng = np.random.default_rng(8)
        X = rng.normal(size=(6, 2))
        labels = rng.choice([-1, 1], 6)
        weights = rng.uniform(0.1, 0.3, 6)
        w0 = rng.normal(size=(1, 2))
        m = linear_model(w0, [0.3], binary=True)
        (gw, gb), = gradients(m, X, labels, weights)
        from scipy.special import expit

        p = expit(X @ w0[0] + 0.3)
        coef = weights * (p - (labels == 1))
        assert np.allclose(gw, (coef[:, None] * X).sum(axis=0)[None, :], atol=1e-12)
        assert np.allclose(gb, [coef.sum()], atol=1e-12)

    @pytest.mark.parametrize("case", range(10))
    def test_finite_difference_agreement(self, case):
        rng = np.random.default_rng(100 + case)
        out = int(rng.integers(1, 4))
        hidden = (int(rng.integers(2, 5)),) if rng.integers(0, 2) else ()
        m = random_model(rng, int(rng.integers(1, 4)), hidden, out)
        b = int(rng.integers(1, 6))
        X = rng.normal(size=(b, m.input_dim))
        labels = rng.choice([-1, 1], b) if out == 1 else rng.integers(0, out, b)
        weights = rng.uniform(0.0, 1.0, b)
        weights /= max(weights.sum(), 1.0)
        analytic = gradients(m, X, labels, weights)
        numeric = finite_difference_gradients(m, X, labels, weights)
        flat_a = np.concatenate([np.r_[gw.ravel(), gb] for gw, gb in analytic])
        flat_n = np.concatenate([np.r_[gw.ravel(), gb] for gw, gb in numeric])
        rel = np.linalg.norm(flat_a - flat_n) / max(np.linalg.norm(flat_n), 1e-12)
        assert rel < 1e-5


class TestSGD:
    def test_vanilla_step(self):
        m = linear_model([[1.0, 1.0]], [0.0])
        opt = SGD(OptimizerConfig(learning_rate=0.1))
        opt.step(m, [(np.array([[1.0, 2.0]]), np.array([3.0]))], epoch=1)
        assert np.allclose(m.layers[0].weights, [[0.9, 0.8]])
        assert np.allclose(m.layers[0].bias, [-0.3])

    def test_learning_rate_schedule(self):
        cfg = OptimizerConfig(learning_rate=0.1, decay_epochs=(75, 90), decay_factor=10)
        assert cfg.lr_at(74) == pytest.approx(0.1)
        assert cfg.lr_at(75) == pytest.approx(0.01)
        assert cfg.lr_at(90) == pytest.approx(0.001)

    def test_momentum_unrolls_to_one_plus_one_point_nine(self):
        m = linear_model([[0.0]], [0.0])
        opt = SGD(OptimizerConfig(learning_rate=1.0, momentum=0.9))
        g = [(np.array([[1.0]]), np.array([0.0]))]
        opt.step(m, g, 1)
        opt.step(m, g, 1)
        assert m.layers[0].weights[0, 0] == pytest.approx(-(1.0 + 1.9), abs=1e-12)

    def test_zero_gradient_zero_decay_is_identity(self):
        rng = np.random.default_rng(11)
        m = random_model(rng, 3, (4,), 2)
        before = [layer.weights.copy() for layer in m.layers]
        zero = [(np.zeros_like(l.weights), np.zeros_like(l.bias)) for l in m.layers]
        opt = SGD(OptimizerConfig(learning_rate=0.5, momentum=0.9, weight_decay=0.0))
        opt.step(m, zero, 1)
        for w0, layer in zip(before, m.layers):
            assert np.array_equal(w0, layer.weights)

    def test_weight_decay_pulls_parameters_in(self):
        m = linear_model([[2.0]], [0.0])
        opt = SGD(OptimizerConfig(learning_rate=0.1, weight_decay=0.5))
        zero = [(np.zeros((1, 1)), np.zeros(1))]
        opt.step(m, zero, 1)
        assert m.layers[0].weights[0, 0] == pytest.approx(2.0 - 0.1 * 0.5 * 2.0)

    def test_decay_epochs_must_increase(self):
        with pytest.raises(ValueError):
            OptimizerConfig(learning_rate=0.1, decay_epochs=(90, 75))


class TestInit:
    def test_same_stream_same_model(self):
        a = init_model([3, 5, 2], rng=np.random.default_rng(9))
        b = init_model([3, 5, 2], rng=np.random.default_rng(9))
        for la, lb in zip(a.layers, b.layers):
            assert np.array_equal(la.weights, lb.weights)

    def test_fan_based_bounds_and_zero_bias(self):
        m = init_model([10, 7], rng=np.random.default_rng(12))
        limit = np.sqrt(6 / 17)
        assert np.abs(m.layers[0].weights).max() <= limit
        assert np.array_equal(m.layers[0].bias, np.zeros(7))

    def test_binary_mode_requires_single_output(self):
        with pytest.raises(ValueError):
            init_model([3, 2], binary=True)
