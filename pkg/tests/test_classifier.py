"""
Unit tests for the frame classifier and its loss.
"""

import numpy as np
import pytest

from activespeaker.classifier import Classifier, frame_cross_entropy, predict
from activespeaker.exceptions import InvalidArgumentError
from activespeaker.tensor import Tensor


class TestClassifier:
    """Test cases for Classifier and predict."""

    def setup_method(self):
        self.classifier = Classifier(256, np.random.default_rng(0))
        self.F_av = np.random.default_rng(1).standard_normal((7, 256))

    def test_scores_are_probabilities(self):
        """Test shape and range of the speaking scores."""
        s = predict(self.F_av, self.classifier).numpy()
        assert s.shape == (7,)
        assert np.all((s >= 0.0) & (s <= 1.0))

    def test_zero_weights_give_one_half(self):
        """Test that a zero linear layer scores every frame 0.5."""
        self.classifier.fc.weight.data = np.zeros((2, 256), dtype=np.float32)
        np.testing.assert_allclose(self.classifier(self.F_av).numpy(), np.full(7, 0.5))

    def test_logit_gap_of_log_three(self):
        """Test that logits (0, ln 3) give a speaking score of 0.75."""
        self.classifier.fc.weight.data = np.zeros((2, 256), dtype=np.float32)
        self.classifier.fc.bias.data = np.array([0.0, np.log(3.0)], dtype=np.float32)
        np.testing.assert_allclose(self.classifier(self.F_av).numpy(), np.full(7, 0.75), rtol=1e-6)

    def test_batched(self):
        """Test (N, T, 256) -> (N, T)."""
        assert self.classifier(np.ones((2, 5, 256))).shape == (2, 5)

    def test_logits_shape(self):
        """Test the two-class logits."""
        assert self.classifier.logits(self.F_av).shape == (7, 2)


class TestFrameCrossEntropy:
    """Test cases for frame_cross_entropy."""

    def test_uniform_scores(self):
        """Test that scores of 0.5 cost ln 2 whatever the labels."""
        loss = frame_cross_entropy(np.full(4, 0.5), [0, 1, 0, 1])
        assert loss.item() == pytest.approx(np.log(2.0))

    def test_worked_example(self):
        """Test s = [0.9, 0.2], y = [1, 0]."""
        loss = frame_cross_entropy(np.array([0.9, 0.2]), [1, 0])
        assert loss.item() == pytest.approx(0.164252, abs=1e-6)

    def test_perfect_prediction(self):
        """Test that clamping keeps a perfect prediction finite and near zero."""
        loss = frame_cross_entropy(np.array([1.0, 0.0]), [1, 0])
        assert 0.0 <= loss.item() < 1e-6

    def test_gradient_flows_to_scores(self):
        """Test that the loss is differentiable in the scores."""
        s = Tensor([0.9, 0.2], requires_grad=True)
        frame_cross_entropy(s, [1, 0]).backward()
        # d/ds of -(y ln s + (1 - y) ln(1 - s)) / T
        np.testing.assert_allclose(s.grad, [-1.0 / (2 * 0.9), 1.0 / (2 * 0.8)], rtol=1e-5)

    def test_masked_batch(self):
        """Test that padded frames are ignored and clips are averaged equally."""
        s = np.array([[0.9, 0.2, 0.5], [0.5, 0.01, 0.99]])
        y = np.array([[1, 0, 1], [1, 0, 0]])
        mask = np.array([[1, 1, 0], [1, 0, 0]])
        expected = (0.164252 + np.log(2.0)) / 2
        assert frame_cross_entropy(s, y, mask).item() == pytest.approx(expected, abs=1e-6)

    def test_length_mismatch(self):
        """Test that scores and labels must match."""
        with pytest.raises(InvalidArgumentError):
            frame_cross_entropy(np.full(3, 0.5), [0, 1])

    def test_non_binary_labels(self):
        """Test that labels outside {0, 1} are rejected."""
        with pytest.raises(InvalidArgumentError):
            frame_cross_entropy(np.full(2, 0.5), [0, 2])
