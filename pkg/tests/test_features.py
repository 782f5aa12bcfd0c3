"""
Unit tests for MFCC extraction and waveform alignment.
"""

import numpy as np
import pytest

from activespeaker.exceptions import InvalidArgumentError
from activespeaker.features import (
    N_MELS,
    N_MFCC,
    Waveform,
    align_lengths,
    extract_mfcc,
    frame_signal,
    mel_centers,
    mel_energies,
    mel_filterbank,
)


class TestWaveform:
    """Test cases for the Waveform container."""

    def test_duration(self):
        """Test duration in seconds."""
        assert Waveform(np.zeros(8000), 16000).duration == pytest.approx(0.5)

    def test_rejects_nan(self):
        """Test that NaN samples are rejected."""
        with pytest.raises(InvalidArgumentError):
            Waveform(np.array([0.0, np.nan]))

    def test_rejects_bad_sample_rate(self):
        """Test that a non-positive sample rate is rejected."""
        with pytest.raises(InvalidArgumentError):
            Waveform(np.zeros(10), 0)


class TestMFCC:
    """Test cases for extract_mfcc."""

    def setup_method(self):
        self.rng = np.random.default_rng(0)
        self.one_second = Waveform(self.rng.uniform(-0.5, 0.5, 16000), 16000)

    def test_four_frames_per_video_frame(self):
        """Test one second at 25 fps gives 100 x 13 float32."""
        mfcc = extract_mfcc(self.one_second, 25)
        assert mfcc.shape == (100, N_MFCC)
        assert mfcc.dtype == np.float32

    def test_short_audio_is_zero_padded(self):
        """Test that 98 computed hops are padded with two zero rows."""
        assert len(frame_signal(self.one_second.samples)) == 98
        mfcc = extract_mfcc(self.one_second, 25)
        assert np.all(mfcc[98:] == 0.0)
        assert np.any(mfcc[97] != 0.0)

    def test_long_audio_is_truncated(self):
        """Test that extra audio past 4T frames is dropped."""
        assert extract_mfcc(self.one_second, 10).shape == (40, N_MFCC)

    def test_silence_gives_identical_frames(self):
        """Test that an all-zero waveform yields the same vector for every frame."""
        mfcc = extract_mfcc(np.zeros(16000), 25)
        np.testing.assert_array_equal(mfcc[:98], np.broadcast_to(mfcc[0], (98, N_MFCC)))

    def test_pure_tone_peaks_at_nearest_filter(self):
        """Test that a 1 kHz tone has most energy in the mel filter centered nearest 1 kHz."""
        t = np.arange(16000) / 16000.0
        energies = mel_energies(0.5 * np.sin(2 * np.pi * 1000.0 * t))
        expected = int(np.argmin(np.abs(mel_centers() - 1000.0)))
        assert np.all(np.argmax(energies, axis=1) == expected)

    def test_filterbank_shape(self):
        """Test the filterbank layout and that every filter peaks at 1 or below."""
        bank = mel_filterbank()
        assert bank.shape == (N_MELS, 257)
        assert bank.max() <= 1.0
        assert np.all(bank.sum(axis=1) > 0)

    def test_doubling_the_waveform_shifts_by_a_constant(self):
        """Test that scaling the audio by 2 moves every frame by one constant vector, in c0 only."""
        w = self.rng.uniform(-0.4, 0.4, 17600)
        base = extract_mfcc(w, 25).astype(np.float64)
        doubled = extract_mfcc(2.0 * w, 25).astype(np.float64)
        shift = doubled - base
        np.testing.assert_allclose(shift, np.broadcast_to(shift[0], shift.shape), atol=1e-4)
        assert shift[0, 0] == pytest.approx(np.log(2.0) * np.sqrt(N_MELS), abs=1e-4)
        np.testing.assert_allclose(shift[:, 1:], 0.0, atol=1e-4)

    def test_frame_count_sweep(self):
        """Test that every clip length from 1 to 250 frames gives exactly 4T MFCC frames."""
        audio = self.rng.uniform(-0.5, 0.5, 250 * 640)
        for T in range(1, 251):
            mfcc = extract_mfcc(align_lengths(Waveform(audio[:T * 640], 16000), 25.0, T), T)
            assert mfcc.shape == (4 * T, N_MFCC), T

    def test_one_hop_is_enough(self):
        """Test that exactly one hop of audio is accepted."""
        mfcc = extract_mfcc(np.full(160, 0.1), 1)
        assert mfcc.shape == (4, N_MFCC)

    def test_empty_waveform(self):
        """Test that an empty waveform is rejected."""
        with pytest.raises(InvalidArgumentError):
            extract_mfcc(np.zeros(0), 5)

    def test_shorter_than_hop(self):
        """Test that fewer than 160 samples at 16 kHz are rejected."""
        with pytest.raises(InvalidArgumentError):
            extract_mfcc(np.zeros(100), 5)

    def test_non_positive_frame_count(self):
        """Test that T must be at least one."""
        with pytest.raises(InvalidArgumentError):
            extract_mfcc(self.one_second, 0)


class TestAlignLengths:
    """Test cases for align_lengths."""

    @pytest.mark.parametrize("seconds", [2.0, 1.9, 2.2])
    def test_exact_duration(self, seconds):
        """Test that the result is exactly T / fps seconds long."""
        w = Waveform(np.ones(int(seconds * 16000)), 16000)
        aligned = align_lengths(w, 25.0, 50)
        assert len(aligned) == 32000

    def test_padding_is_zero(self):
        """Test that short audio is padded with silence."""
        aligned = align_lengths(np.ones(16000), 25.0, 50)
        assert np.all(aligned.samples[:16000] == 1.0)
        assert np.all(aligned.samples[16000:] == 0.0)

    def test_non_positive_fps(self):
        """Test that fps must be positive."""
        with pytest.raises(InvalidArgumentError):
            align_lengths(np.ones(10), 0.0, 5)
