"""
Unit tests for audio mixing and visual augmentation.
"""

import numpy as np
import pytest

from activespeaker.augmentation import (
    external_noise_mix,
    flip_frames,
    negative_sample_mix,
    resize_frames,
    rir_augment,
    rms,
    visual_augment,
)
from activespeaker.config import AugmentationPlan, VisualAugmentPlan
from activespeaker.exceptions import InvalidArgumentError
from activespeaker.features import Waveform
from activespeaker.writers import write_wav


def measured_snr(primary: np.ndarray, mixed: np.ndarray) -> float:
    return 20.0 * np.log10(rms(primary) / rms(mixed.astype(np.float64) - primary.astype(np.float64)))


class TestNegativeSampleMix:
    """Test cases for negative_sample_mix."""

    def setup_method(self):
        rng = np.random.default_rng(0)
        self.primary = Waveform(rng.uniform(-0.3, 0.3, 16000), 16000)
        self.noise = Waveform(rng.uniform(-0.3, 0.3, 16000), 16000)

    def test_very_high_snr_keeps_primary(self):
        """Test that +100 dB leaves the primary essentially unchanged."""
        result = negative_sample_mix(self.primary, self.noise, 100.0)
        np.testing.assert_allclose(result.waveform.samples, self.primary.samples, atol=1e-5)
        assert not result.noise_silent

    def test_zero_db_equal_levels(self):
        """Test that 0 dB between equal-rms tracks is a plain sum."""
        noise = Waveform(self.noise.samples * (rms(self.primary.samples) / rms(self.noise.samples)), 16000)
        result = negative_sample_mix(self.primary, noise, 0.0)
        assert result.gain == pytest.approx(1.0, rel=1e-5)
        np.testing.assert_allclose(result.waveform.samples, self.primary.samples + noise.samples, atol=1e-5)

    def test_measured_snr(self):
        """Test that the realized SNR matches the request when noise must be looped."""
        short_noise = Waveform(self.noise.samples[:3000], 16000)
        result = negative_sample_mix(self.primary, short_noise, 10.0)
        assert len(result.waveform) == len(self.primary)
        assert measured_snr(self.primary.samples, result.waveform.samples) == pytest.approx(10.0, abs=0.1)

    def test_silent_noise(self):
        """Test that silent noise returns the primary and raises the flag."""
        result = negative_sample_mix(self.primary, np.zeros(16000), 5.0)
        assert result.noise_silent
        assert result.gain == 0.0
        np.testing.assert_array_equal(result.waveform.samples, self.primary.samples)

    def test_clipping_is_reported(self):
        """Test that loud mixes are clipped to [-1, 1] and the clipped fraction recorded."""
        loud = Waveform(np.full(16000, 0.9), 16000)
        result = negative_sample_mix(loud, self.noise, -10.0)
        assert result.clipped_fraction > 0.01
        assert np.abs(result.waveform.samples).max() <= 1.0

    def test_sample_rate_mismatch(self):
        """Test that tracks must share a sample rate."""
        with pytest.raises(InvalidArgumentError):
            negative_sample_mix(self.primary, Waveform(self.noise.samples, 8000), 5.0)


class TestExternalNoiseMix:
    """Test cases for external_noise_mix."""

    def setup_method(self):
        rng = np.random.default_rng(1)
        self.primary = Waveform(rng.uniform(-0.3, 0.3, 8000), 16000)
        self.noise_samples = [rng.uniform(-0.5, 0.5, 4000), rng.uniform(-0.2, 0.2, 12000)]

    def write_noise(self, directory):
        for i, samples in enumerate(self.noise_samples):
            write_wav(samples, directory / f"noise{i}.wav", 16000)
        return directory

    def test_same_seed_same_mix(self, tmp_path):
        """Test that the choice of file and SNR depends only on the seed."""
        noise_dir = self.write_noise(tmp_path)
        a = external_noise_mix(self.primary, noise_dir, (0.0, 15.0), seed=4)
        b = external_noise_mix(self.primary, noise_dir, (0.0, 15.0), seed=4)
        assert np.array_equal(a.waveform.samples, b.waveform.samples)

    def test_fixed_snr(self, tmp_path):
        """Test a degenerate [10, 10] dB range."""
        noise_dir = self.write_noise(tmp_path)
        result = external_noise_mix(self.primary, noise_dir, (10.0, 10.0), seed=0)
        assert measured_snr(self.primary.samples, result.waveform.samples) == pytest.approx(10.0, abs=0.1)

    def test_empty_directory(self, tmp_path):
        """Test that a directory without WAV files is rejected."""
        with pytest.raises(InvalidArgumentError):
            external_noise_mix(self.primary, tmp_path, (0.0, 15.0), seed=0)

    def test_reverberation_not_available(self, tmp_path):
        """Test that RIR augmentation is reported as unavailable."""
        with pytest.raises(NotImplementedError):
            rir_augment(self.primary, tmp_path, seed=0)


class TestVisualAugment:
    """Test cases for visual_augment."""

    def setup_method(self):
        self.frames = np.random.default_rng(2).uniform(0, 1, (4, 1, 112, 112)).astype(np.float32)

    def test_no_plan_is_identity(self):
        """Test that plan=None returns an unchanged copy."""
        out = visual_augment(self.frames, None, seed=0)
        np.testing.assert_array_equal(out, self.frames)
        assert out is not self.frames

    def test_disabled_plan_is_identity(self):
        """Test a plan with every transform switched off."""
        plan = VisualAugmentPlan(flip_prob=0.0, rotate_deg_max=0.0, crop_scale_min=1.0)
        np.testing.assert_array_equal(visual_augment(self.frames, plan, seed=3), self.frames)

    def test_flip_is_involution(self):
        """Test that flipping twice restores the frames."""
        np.testing.assert_array_equal(flip_frames(flip_frames(self.frames)), self.frames)

    def test_always_flip(self):
        """Test a plan that only flips."""
        plan = VisualAugmentPlan(flip_prob=1.0, rotate_deg_max=0.0, crop_scale_min=1.0)
        np.testing.assert_array_equal(visual_augment(self.frames, plan, seed=0), self.frames[..., ::-1])

    def test_default_plan(self):
        """Test shape, range and determinism of the default plan."""
        plan = AugmentationPlan()
        a = visual_augment(self.frames, plan, seed=5)
        b = visual_augment(self.frames, plan, seed=5)
        assert a.shape == self.frames.shape
        assert a.dtype == np.float32
        assert a.min() >= 0.0 and a.max() <= 1.0
        assert np.array_equal(a, b)

    def test_resize_same_size_is_identity(self):
        """Test that resampling to the input size reproduces it."""
        np.testing.assert_allclose(resize_frames(self.frames, 112), self.frames, atol=1e-6)

    def test_invalid_plan(self):
        """Test plan validation."""
        with pytest.raises(InvalidArgumentError):
            VisualAugmentPlan(flip_prob=1.5)
        with pytest.raises(InvalidArgumentError):
            VisualAugmentPlan(crop_scale_min=0.0)


class TestAugmentationPlan:
    """Test cases for AugmentationPlan."""

    def test_modes(self, tmp_path):
        """Test the three comparison arms."""
        assert AugmentationPlan.for_mode("neg").mode == "neg"
        assert AugmentationPlan.for_mode("none").mode == "none"
        assert AugmentationPlan.for_mode("noise", noise_dir=str(tmp_path)).mode == "noise"

    def test_noise_needs_directory(self):
        """Test that the noise arm requires a directory."""
        with pytest.raises(InvalidArgumentError):
            AugmentationPlan.for_mode("noise")

    def test_unknown_mode(self):
        """Test that an unknown arm is rejected."""
        with pytest.raises(InvalidArgumentError):
            AugmentationPlan.for_mode("mixup")

    def test_dict_round_trip(self):
        """Test serialization of a plan with visual settings."""
        plan = AugmentationPlan(snr_db_range=(2, 8), seed=3)
        assert AugmentationPlan.from_dict(plan.to_dict()) == plan
