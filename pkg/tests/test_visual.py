"""
Unit tests for the visual temporal encoder.
"""

import numpy as np
import pytest

from activespeaker.config import EMBED_DIM, visual_config
from activespeaker.exceptions import InvalidArgumentError
from activespeaker.visual import VisualEncoder, encode_visual


class TestVisualEncoder:
    """Test cases for VisualEncoder at desk scale."""

    def setup_method(self):
        self.cfg = visual_config("desk")
        self.encoder = VisualEncoder(self.cfg, np.random.default_rng(0)).eval()
        self.rng = np.random.default_rng(1)

    def test_single_frame(self):
        """Test that T=1 gives one embedding."""
        out = self.encoder(self.rng.uniform(0, 1, (1, 1, 112, 112)))
        assert out.shape == (1, EMBED_DIM)

    def test_sequence_shape(self):
        """Test (N, T, 1, 112, 112) -> (N, T, 128)."""
        out = self.encoder(self.rng.uniform(0, 1, (2, 25, 1, 112, 112)))
        assert out.shape == (2, 25, EMBED_DIM)
        assert np.all(np.isfinite(out.numpy()))

    def test_frontend_width(self):
        """Test the per-frame feature width matches the last trunk stage."""
        per_frame = self.encoder.frontend(self.rng.uniform(0, 1, (4, 1, 112, 112)))
        assert per_frame.shape == (4, self.cfg.trunk_channels[-1])

    def test_eval_mode_is_deterministic(self):
        """Test that two eval forwards agree bit for bit."""
        faces = self.rng.uniform(0, 1, (5, 1, 112, 112))
        assert np.array_equal(self.encoder(faces).numpy(), self.encoder(faces).numpy())

    def test_input_dependence(self):
        """Test that different faces give different embeddings."""
        zeros = self.encoder(np.zeros((3, 1, 112, 112))).numpy()
        ones = self.encoder(np.ones((3, 1, 112, 112))).numpy()
        assert not np.allclose(zeros, ones)

    def test_translation_equivariance_on_interior_frames(self):
        """Test that delaying the clip by two frames delays every interior embedding by two frames."""
        faces = self.rng.uniform(0, 1, (30, 1, 112, 112))
        shifted = np.concatenate([self.rng.uniform(0, 1, (2, 1, 112, 112)), faces[:-2]])
        out = self.encoder(faces).numpy()
        out_shifted = self.encoder(shifted).numpy()
        # 21-frame receptive field: frames 12..19 of the shifted clip see no boundary
        np.testing.assert_allclose(out_shifted[12:20], out[10:18], atol=1e-5)
        assert not np.allclose(out_shifted[:2], out[:2])

    def test_same_seed_same_embedding(self):
        """Test that the convenience wrapper is a function of the seed."""
        faces = self.rng.uniform(0, 1, (3, 1, 112, 112))
        a = encode_visual(faces, self.cfg, seed=5).numpy()
        b = encode_visual(faces, self.cfg, seed=5).numpy()
        assert np.array_equal(a, b)

    def test_zero_features_stay_zero_through_temporal_stack(self):
        """Test that zero per-frame features map to zero with freshly initialized biases."""
        out = self.encoder.temporal(np.zeros((6, self.cfg.trunk_channels[-1])))
        np.testing.assert_array_equal(out.numpy(), np.zeros((6, EMBED_DIM)))

    def test_wrong_image_size(self):
        """Test that non-112 crops are rejected."""
        with pytest.raises(InvalidArgumentError):
            self.encoder(np.zeros((2, 1, 64, 64)))

    def test_wrong_channel_count(self):
        """Test that colour input is rejected."""
        with pytest.raises(InvalidArgumentError):
            self.encoder(np.zeros((1, 2, 3, 112, 112)))

    def test_wrong_temporal_width(self):
        """Test that per-frame features of the wrong width are rejected."""
        with pytest.raises(InvalidArgumentError):
            self.encoder.temporal(np.zeros((4, 7)))
