"""Tests for the neural network."""
from unittest import TestCase, main

import numpy as np
from pydantic import ValidationError
from scipy.special import expit

from vocalfold.ann import (
    MlpGradient,
    MlpModel,
    TrainConfig,
    forward,
    init_mlp,
    loss_and_gradients,
    numerical_gradient_check,
    predict,
    predict_proba,
    train,
)
from vocalfold.features import Label
from vocalfold.util import AnnError, TrainingDiverged


def zero_model(d: int, h: int) -> MlpModel:
    return MlpModel(np.zeros((h, d)), np.zeros(h), np.zeros(h), 0.0)


def blobs(seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Twenty points in two clusters separated by a margin of at least 1."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-0.5, 0.5, (20, 2))
    t = np.array([0, 1] * 10)
    x[t == 0] += [-1, -1]
    x[t == 1] += [1, 1]
    return x, t


class ForwardTests(TestCase):
    """Tests for evaluating the network."""

    def test_init(self):
        """Initial weights lie within the fan-in bounds and the biases start at zero."""
        cfg = TrainConfig(seed=4)
        model = init_mlp(36, cfg)
        self.assertEqual(model.w1.shape, (5, 36))
        self.assertEqual(model.w2.shape, (5,))
        self.assertTrue(np.all(np.abs(model.w1) <= 1 / 6))
        self.assertTrue(np.all(np.abs(model.w2) <= 1 / np.sqrt(5)))
        self.assertTrue(np.all(model.b1 == 0))
        self.assertEqual(model.b2, 0)
        np.testing.assert_array_equal(init_mlp(36, cfg).parameters(), model.parameters())
        self.assertFalse(np.array_equal(init_mlp(36, TrainConfig(seed=5)).parameters(), model.parameters()))
        with self.assertRaises(AnnError):
            init_mlp(0)

    def test_zero_model(self):
        self.assertEqual(forward(zero_model(3, 2), [1.0, 2.0, 3.0]), 0.5)
        self.assertEqual(predict(zero_model(3, 2), [1.0, 2.0, 3.0]), Label.healthy)

    def test_single_hidden_unit(self):
        for c in (-3.0, 0.7, 12.0):
            model = MlpModel(np.zeros((1, 4)), np.zeros(1), [c], 0.0)
            self.assertAlmostEqual(forward(model, np.arange(4.0)), expit(c / 2), places=15)

    def test_decision_rule(self):
        """Outputs above one half are classified as pathological."""
        model = MlpModel(np.zeros((1, 2)), np.zeros(1), [0.0], np.log(9))
        self.assertAlmostEqual(forward(model, [0.0, 0.0]), 0.9, places=12)
        self.assertEqual(predict(model, [0.0, 0.0]), Label.pathological)

    def test_scalar_oracle(self):
        rng = np.random.default_rng(1)
        model = MlpModel(rng.standard_normal((3, 4)), rng.standard_normal(3), rng.standard_normal(3), 0.3)
        x = rng.standard_normal(4)
        hidden = [1 / (1 + np.exp(-(sum(model.w1[j, i] * x[i] for i in range(4)) + model.b1[j]))) for j in range(3)]
        output = 1 / (1 + np.exp(-(sum(model.w2[j] * hidden[j] for j in range(3)) + model.b2)))
        self.assertAlmostEqual(forward(model, x), output, places=12)

    def test_extreme_inputs(self):
        """Very large inputs saturate the output without overflowing."""
        model = MlpModel(np.full((2, 1), 1.0), np.zeros(2), [600.0, 600.0], 0.0)
        for x in (-1000.0, 1000.0):
            y = forward(model, [x])
            self.assertTrue(np.isfinite(y))
            self.assertTrue(0 <= y <= 1)

    def test_batch(self):
        rng = np.random.default_rng(2)
        model = init_mlp(6, TrainConfig(hidden=4))
        x = rng.standard_normal((5, 6))
        np.testing.assert_allclose(predict_proba(model, x), [forward(model, row) for row in x], rtol=1e-14)

    def test_dimension_mismatch(self):
        """Inputs of the wrong length are rejected."""
        model = zero_model(3, 2)
        with self.assertRaises(AnnError):
            forward(model, [1.0, 2.0])
        with self.assertRaises(AnnError):
            forward(model, np.zeros((2, 3)))
        with self.assertRaises(AnnError):
            MlpModel(np.zeros((2, 3)), np.zeros(3), np.zeros(2), 0.0)
        with self.assertRaises(AnnError):
            MlpModel(np.zeros((2, 3)), np.zeros(2), [np.nan, 0.0], 0.0)

    def test_parameters_roundtrip(self):
        model = init_mlp(4, TrainConfig(hidden=3, seed=9))
        params = model.parameters()
        self.assertEqual(params.size, 3 * 4 + 3 + 3 + 1)
        restored = MlpModel.from_parameters(params, 4, 3)
        np.testing.assert_array_equal(restored.parameters(), params)
        with self.assertRaises(AnnError):
            MlpModel.from_parameters(params[:-1], 4, 3)


class GradientTests(TestCase):
    """Tests for backpropagation."""

    def test_zero_model(self):
        """Backpropagation agrees with finite differences at the all zero network."""
        x = np.random.default_rng(3).standard_normal((6, 4))
        t = np.array([1, 1, 1, 0, 1, 0])
        self.assertLess(numerical_gradient_check(zero_model(4, 3), x, t), 1e-6)

    def test_random_models(self):
        """Backpropagation agrees with finite differences for random networks."""
        rng = np.random.default_rng(4)
        checked = 0
        while checked < 20:
            model = MlpModel(rng.normal(0, 0.5, (5, 10)), rng.normal(0, 0.5, 5), rng.normal(0, 1, 5), rng.normal())
            x = rng.standard_normal((8, 10))
            t = rng.integers(0, 2, 8)
            _, gradient = loss_and_gradients(model, x, t)
            # relative errors of gradients near zero are dominated by round-off
            if np.min(np.abs(gradient.parameters())) < 1e-4:
                continue
            self.assertLess(numerical_gradient_check(model, x, t, gradient=gradient), 1e-5)
            checked += 1

    def test_corrupted_gradient_is_detected(self):
        rng = np.random.default_rng(5)
        model = init_mlp(3, TrainConfig(hidden=2))
        x = rng.standard_normal((4, 3))
        t = np.array([0, 1, 1, 1])
        _, gradient = loss_and_gradients(model, x, t)
        corrupted = MlpGradient(gradient.w1, gradient.b1, gradient.w2, 2 * gradient.b2)
        self.assertGreater(numerical_gradient_check(model, x, t, gradient=corrupted), 1e-2)

    def test_loss_value(self):
        """The loss of a network that always outputs one half is ln 2."""
        model = zero_model(2, 1)
        loss, _ = loss_and_gradients(model, np.zeros((4, 2)), [0, 1, 1, 0])
        self.assertAlmostEqual(loss, np.log(2), places=15)

    def test_non_finite_gradient(self):
        """Gradients of a non-finite loss are returned rather than rejected."""
        x = np.zeros((2, 2))
        x[0, 1] = np.nan
        loss, gradient = loss_and_gradients(init_mlp(2), x, [0, 1])
        self.assertTrue(np.isnan(loss))
        self.assertFalse(np.all(np.isfinite(gradient.parameters())))

    def test_invalid_targets(self):
        model = zero_model(2, 1)
        with self.assertRaises(AnnError):
            loss_and_gradients(model, np.zeros((2, 2)), [0, 2])
        with self.assertRaises(AnnError):
            loss_and_gradients(model, np.zeros((2, 2)), [0, 1, 1])


class TrainTests(TestCase):
    """Tests for gradient descent training."""

    def test_config_bounds(self):
        with self.assertRaises(ValidationError):
            TrainConfig(epochs=0)
        with self.assertRaises(ValidationError):
            TrainConfig(learning_rate=-0.1)
        with self.assertRaises(ValidationError):
            TrainConfig(hidden=0)

    def test_zero_step(self):
        """A learning rate of zero leaves the weights unchanged."""
        x, t = blobs()
        model = init_mlp(2, TrainConfig(hidden=3))
        trained = train(model, x, t, TrainConfig(learning_rate=0, epochs=1, hidden=3))
        np.testing.assert_array_equal(trained.parameters(), model.parameters())

    def test_separable_blobs(self):
        """Two well separated clusters are learned perfectly."""
        x, t = blobs()
        cfg = TrainConfig(learning_rate=0.5, hidden=5)
        trace: list[float] = []
        model = train(init_mlp(2, cfg), x, t, cfg, loss_trace=trace)
        self.assertEqual(len(trace), 2000)
        self.assertTrue(np.all(np.isfinite(trace)))
        self.assertLessEqual(np.mean(trace[-200:]), np.mean(trace[:200]))
        self.assertEqual([predict(model, row) for row in x], [Label(v) for v in t])
        np.testing.assert_array_equal(predict_proba(model, x) > 0.5, t == 1)

    def test_deterministic(self):
        """Training with the same seed gives the same network."""
        x, t = blobs(1)
        cfg = TrainConfig(epochs=300, seed=2)
        first = train(init_mlp(2, cfg), x, t, cfg)
        second = train(init_mlp(2, cfg), x, t, cfg)
        np.testing.assert_array_equal(first.parameters(), second.parameters())

    def test_sample_order(self):
        x, t = blobs(2)
        cfg = TrainConfig(epochs=300)
        order = np.random.default_rng(6).permutation(20)
        first = train(init_mlp(2, cfg), x, t, cfg)
        second = train(init_mlp(2, cfg), x[order], t[order], cfg)
        np.testing.assert_allclose(first.parameters(), second.parameters(), rtol=1e-9, atol=1e-12)

    def test_input_is_not_modified(self):
        x, t = blobs()
        model = init_mlp(2)
        before = model.parameters()
        train(model, x, t, TrainConfig(epochs=5))
        np.testing.assert_array_equal(model.parameters(), before)

    def test_single_class(self):
        x, _ = blobs()
        with self.assertRaises(AnnError):
            train(init_mlp(2), x, np.ones(20), TrainConfig(epochs=1))

    def test_divergence(self):
        """A NaN loss is reported together with its epoch."""
        x, t = blobs()
        x[3, 0] = np.nan
        with self.assertRaises(TrainingDiverged) as context:
            train(init_mlp(2), x, t, TrainConfig(epochs=10))
        self.assertEqual(context.exception.epoch, 0)


if __name__ == "__main__":
    main()
