"""
Unit tests for Adam and the learning-rate schedule.
"""

import numpy as np
import pytest

from activespeaker.config import TrainConfig
from activespeaker.exceptions import InvalidArgumentError
from activespeaker.nn import Parameter
from activespeaker.optim import Adam, AdamMoments, adam_step, lr_at_epoch


def quadratic_step(optimizer: Adam, target: np.ndarray) -> float:
    optimizer.zero_grad()
    (p,) = optimizer.params
    diff = p - target
    loss = (diff * diff).sum()
    loss.backward()
    optimizer.step()
    return loss.item()


class TestAdamStep:
    """Test cases for the pure update function."""

    def setup_method(self):
        self.params = [np.array([1.0, -2.0]), np.ones((2, 2))]
        self.moments = AdamMoments.zeros_like(self.params)

    def test_zero_gradient_leaves_parameters(self):
        """Test that a zero gradient is a no-op on the parameters."""
        new, moments = adam_step(self.params, [np.zeros(2), np.zeros((2, 2))], self.moments, lr=0.1)
        np.testing.assert_array_equal(new[0], self.params[0])
        np.testing.assert_array_equal(new[1], self.params[1])
        assert moments.t == 1

    def test_first_step_is_lr_times_sign(self):
        """Test the bias-corrected first step."""
        new, _ = adam_step(self.params, [np.array([0.5, -3.0]), None], self.moments, lr=0.1)
        np.testing.assert_allclose(new[0], [0.9, -1.9], atol=1e-6)

    def test_none_gradient_is_skipped(self):
        """Test that a parameter without gradient and its moments stay as they were."""
        new, moments = adam_step(self.params, [np.ones(2), None], self.moments, lr=0.1)
        assert new[1] is self.params[1]
        assert moments.m[1] is self.moments.m[1]

    def test_inputs_not_modified(self):
        """Test that the update is pure."""
        before = [p.copy() for p in self.params]
        adam_step(self.params, [np.ones(2), np.ones((2, 2))], self.moments, lr=0.1)
        for p, b in zip(self.params, before):
            np.testing.assert_array_equal(p, b)
        assert self.moments.t == 0
        np.testing.assert_array_equal(self.moments.m[0], np.zeros(2))

    def test_shape_mismatch(self):
        """Test that a gradient of the wrong shape is rejected."""
        with pytest.raises(InvalidArgumentError):
            adam_step(self.params, [np.ones(3), None], self.moments, lr=0.1)


class TestAdam:
    """Test cases for the stateful optimizer."""

    def test_square_decreases(self):
        """Test one step on x^2 from x = 1 with lr 0.1."""
        opt = Adam([Parameter([1.0])], lr=0.1)
        quadratic_step(opt, np.zeros(1))
        assert opt.params[0].data[0] == pytest.approx(0.9, abs=1e-6)

    def test_quadratic_converges(self):
        """Test that 200 steps reach the minimum of a shifted quadratic."""
        target = np.array([1.0, -2.0, 0.5])
        opt = Adam([Parameter(np.zeros(3))], lr=0.1)
        for _ in range(200):
            quadratic_step(opt, target)
        np.testing.assert_allclose(opt.params[0].data, target, atol=1e-3)

    def test_state_dict_round_trip(self):
        """Test that a restored optimizer continues exactly like the original."""
        target = np.array([0.3, -0.7])
        a = Adam([Parameter(np.zeros(2))], lr=0.05)
        for _ in range(5):
            quadratic_step(a, target)
        b = Adam([Parameter(a.params[0].data.copy())], lr=0.05)
        b.load_state_dict(a.state_dict())
        for _ in range(3):
            quadratic_step(a, target)
            quadratic_step(b, target)
        assert np.array_equal(a.params[0].data, b.params[0].data)

    def test_incomplete_state(self):
        """Test that missing moments are reported."""
        opt = Adam([Parameter(np.zeros(2))])
        with pytest.raises(InvalidArgumentError):
            opt.load_state_dict({"t": np.array(1.0)})

    def test_non_positive_lr(self):
        """Test that the learning rate must be positive."""
        with pytest.raises(InvalidArgumentError):
            Adam([Parameter(np.zeros(2))], lr=0.0)


class TestSchedule:
    """Test cases for lr_at_epoch."""

    def test_exponential_decay(self):
        """Test 1e-4 decayed by 5% per epoch."""
        cfg = TrainConfig(lr0=1e-4, lr_decay_per_epoch=0.95)
        assert lr_at_epoch(cfg, 0) == pytest.approx(1e-4)
        assert lr_at_epoch(cfg, 1) == pytest.approx(9.5e-5)
        assert lr_at_epoch(cfg, 2) == pytest.approx(9.025e-5)

    def test_negative_epoch(self):
        """Test that epochs start at 0."""
        with pytest.raises(InvalidArgumentError):
            lr_at_epoch(TrainConfig(), -1)

    @pytest.mark.parametrize("kwargs", [{"lr0": 0.0}, {"lr_decay_per_epoch": 1.5}, {"batch_size": 0},
                                        {"fixed_frames": 0}, {"model_scale": "huge"}])
    def test_invalid_train_config(self, kwargs):
        """Test TrainConfig validation."""
        with pytest.raises(InvalidArgumentError):
            TrainConfig(**kwargs)
