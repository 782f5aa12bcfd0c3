"""
MFCC extraction locked to the video frame rate.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np
from scipy.fft import dct, rfft
from scipy.signal import get_window

from .config import MFCC_PER_VIDEO_FRAME, SAMPLE_RATE
from .exceptions import InvalidArgumentError

logger = logging.getLogger(__name__)

PRE_EMPHASIS = 0.97
WINDOW_MS = 25.0
HOP_MS = 10.0
N_FFT = 512
N_MELS = 40
N_MFCC = 13
LOG_FLOOR = 1e-10


@dataclass
class Waveform:
    """Mono audio samples in [-1, 1] with their sample rate."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float32).reshape(-1)
        if self.sample_rate <= 0:
            raise InvalidArgumentError(f"sample_rate must be positive, got {self.sample_rate}")
        if np.isnan(self.samples).any():
            raise InvalidArgumentError("Waveform contains NaN samples")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def __len__(self) -> int:
        return len(self.samples)


WaveformLike = Union[Waveform, np.ndarray]


def _as_waveform(w: WaveformLike, sample_rate: int = SAMPLE_RATE) -> Waveform:
    return w if isinstance(w, Waveform) else Waveform(np.asarray(w), sample_rate)


def hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=8)
def mel_filterbank(sample_rate: int = SAMPLE_RATE, n_fft: int = N_FFT, n_mels: int = N_MELS) -> np.ndarray:
    """
    Triangular mel filters spanning 0 Hz to sample_rate / 2.

    Returns:
        Array of shape (n_mels, n_fft // 2 + 1)
    """
    edges = mel_to_hz(np.linspace(hz_to_mel(0.0), hz_to_mel(sample_rate / 2.0), n_mels + 2))
    freqs = np.arange(n_fft // 2 + 1) * sample_rate / n_fft
    left, center, right = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs[None, :] - left) / (center - left)
    falling = (right - freqs[None, :]) / (right - center)
    bank = np.maximum(0.0, np.minimum(rising, falling))
    bank.flags.writeable = False
    return bank


def mel_centers(sample_rate: int = SAMPLE_RATE, n_mels: int = N_MELS) -> np.ndarray:
    """Center frequency in Hz of each mel filter."""
    return mel_to_hz(np.linspace(hz_to_mel(0.0), hz_to_mel(sample_rate / 2.0), n_mels + 2))[1:-1]


def frame_signal(samples: np.ndarray, sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    """
    Pre-emphasize and cut into Hamming-windowed frames.

    A signal shorter than one window is zero-padded to one window.

    Returns:
        Array of shape (n_frames, window_length)
    """
    win = int(round(sample_rate * WINDOW_MS / 1000.0))
    hop = int(round(sample_rate * HOP_MS / 1000.0))
    x = np.asarray(samples, dtype=np.float64)
    emphasized = np.append(x[:1], x[1:] - PRE_EMPHASIS * x[:-1])
    if len(emphasized) < win:
        emphasized = np.pad(emphasized, (0, win - len(emphasized)))
    frames = np.lib.stride_tricks.sliding_window_view(emphasized, win)[::hop]
    return frames * get_window("hamming", win, fftbins=False)


def mel_energies(w: WaveformLike, sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    """Mel filterbank energies (magnitude spectrum), shape (n_frames, 40)."""
    w = _as_waveform(w, sample_rate)
    spectrum = np.abs(rfft(frame_signal(w.samples, w.sample_rate), n=N_FFT, axis=-1))
    return spectrum @ mel_filterbank(w.sample_rate).T


def extract_mfcc(w: WaveformLike, target_video_frames: int, sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    """
    Compute 13 MFCCs per 10 ms hop, padded or truncated to 4 frames per video frame.

    Args:
        w: Waveform (or raw samples at sample_rate)
        target_video_frames: Paired video frame count T
        sample_rate: Sample rate used when w is a raw array

    Returns:
        float32 array of shape (4 * T, 13)

    Raises:
        InvalidArgumentError: If the waveform is empty or shorter than one hop, or T < 1
    """
    w = _as_waveform(w, sample_rate)
    hop = int(round(w.sample_rate * HOP_MS / 1000.0))
    if len(w) == 0:
        raise InvalidArgumentError("Cannot extract MFCCs from an empty waveform")
    if len(w) < hop:
        raise InvalidArgumentError(f"Waveform of {len(w)} samples is shorter than one {hop}-sample hop")
    if target_video_frames < 1:
        raise InvalidArgumentError(f"target_video_frames must be >= 1, got {target_video_frames}")

    log_mel = np.log(np.maximum(mel_energies(w), LOG_FLOOR))
    mfcc = dct(log_mel, type=2, norm="ortho", axis=-1)[:, :N_MFCC]

    n_target = MFCC_PER_VIDEO_FRAME * target_video_frames
    if len(mfcc) < n_target:
        mfcc = np.pad(mfcc, ((0, n_target - len(mfcc)), (0, 0)))
    return mfcc[:n_target].astype(np.float32)


def align_lengths(w: WaveformLike, fps: float, T: int, sample_rate: int = SAMPLE_RATE) -> Waveform:
    """Trim or zero-pad the waveform to exactly T / fps seconds."""
    if fps <= 0:
        raise InvalidArgumentError(f"fps must be positive, got {fps}")
    w = _as_waveform(w, sample_rate)
    n = int(round(T / fps * w.sample_rate))
    samples = w.samples[:n]
    if len(samples) < n:
        samples = np.pad(samples, (0, n - len(samples)))
    return Waveform(samples, w.sample_rate)
