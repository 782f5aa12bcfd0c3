"""
Audio mixing and per-clip visual augmentation.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
from scipy import ndimage

from .config import AugmentationPlan, VisualAugmentPlan
from .exceptions import InvalidArgumentError
from .features import Waveform, WaveformLike, _as_waveform
from .readers import read_wav

logger = logging.getLogger(__name__)

SILENT_RMS = 1e-8
CLIP_WARN_FRACTION = 0.01


@dataclass
class MixResult:
    waveform: Waveform
    gain: float
    clipped_fraction: float
    noise_silent: bool


def rms(samples: np.ndarray) -> float:
    samples = np.asarray(samples, dtype=np.float64)
    return float(np.sqrt(np.mean(samples ** 2))) if samples.size else 0.0


def negative_sample_mix(primary: WaveformLike, noise: WaveformLike, snr_db: float) -> MixResult:
    """
    Overlay noise on the primary track at a given SNR.

    The noise is looped or truncated to the primary length and scaled by
    g = rms(primary) / (rms(noise) * 10^(snr_db / 20)). The result is clipped
    to [-1, 1]. Labels of the primary clip are not touched.

    Args:
        primary: Track whose labels are kept
        noise: Track mixed in as interference
        snr_db: Target primary-to-noise ratio in dB

    Returns:
        MixResult; for silent noise (rms < 1e-8) the primary is returned
        unchanged with noise_silent=True
    """
    primary, noise = _as_waveform(primary), _as_waveform(noise)
    if primary.sample_rate != noise.sample_rate:
        raise InvalidArgumentError(
            f"Cannot mix {primary.sample_rate} Hz audio with {noise.sample_rate} Hz noise"
        )
    n = len(primary)
    noise_samples = np.resize(noise.samples, n) if len(noise) else np.zeros(n, dtype=np.float32)
    noise_rms = rms(noise_samples)
    if noise_rms < SILENT_RMS:
        logger.warning("Noise track is silent (rms %.2e); primary returned unchanged", noise_rms)
        return MixResult(Waveform(primary.samples.copy(), primary.sample_rate), 0.0, 0.0, True)

    gain = rms(primary.samples) / (noise_rms * 10.0 ** (snr_db / 20.0))
    mixed = primary.samples.astype(np.float64) + gain * noise_samples.astype(np.float64)
    clipped_fraction = float(np.mean(np.abs(mixed) > 1.0)) if n else 0.0
    if clipped_fraction > CLIP_WARN_FRACTION:
        logger.warning("Mixing clipped %.1f%% of samples", 100.0 * clipped_fraction)
    out = np.clip(mixed, -1.0, 1.0)
    return MixResult(Waveform(out, primary.sample_rate), float(gain), clipped_fraction, False)


def external_noise_mix(primary: WaveformLike, noise_dir: Union[str, Path], snr_db_range: Tuple[float, float],
                       seed: int) -> MixResult:
    """
    Mix one uniformly chosen WAV from noise_dir at an SNR drawn uniformly from the range.

    Files are considered in sorted name order, so the choice depends only on seed.

    Raises:
        InvalidArgumentError: If the directory holds no WAV files
    """
    noise_dir = Path(noise_dir)
    files = sorted(noise_dir.glob("*.wav")) if noise_dir.is_dir() else []
    if not files:
        raise InvalidArgumentError(f"No WAV files found in noise directory '{noise_dir}'")
    low, high = snr_db_range
    if low > high:
        raise InvalidArgumentError(f"snr_db_range low {low} exceeds high {high}")
    rng = np.random.default_rng(seed)
    choice = files[int(rng.integers(len(files)))]
    snr_db = float(rng.uniform(low, high)) if high > low else float(low)
    logger.debug("Mixing noise %s at %.2f dB", choice.name, snr_db)
    return negative_sample_mix(primary, read_wav(choice), snr_db)


def rir_augment(primary: WaveformLike, rir_dir: Union[str, Path], seed: int) -> Waveform:
    """Room impulse response convolution (not available)."""
    raise NotImplementedError("Reverberation augmentation is not implemented")


def flip_frames(frames: np.ndarray) -> np.ndarray:
    """Mirror every frame horizontally."""
    return np.ascontiguousarray(np.asarray(frames)[..., ::-1])


def resize_frames(frames: np.ndarray, out_size: int) -> np.ndarray:
    """Bilinear resample of the two trailing axes to out_size x out_size."""
    frames = np.asarray(frames, dtype=np.float32)
    in_h, in_w = frames.shape[-2:]
    rows = (np.arange(out_size) + 0.5) * in_h / out_size - 0.5
    cols = (np.arange(out_size) + 0.5) * in_w / out_size - 0.5
    grid = np.meshgrid(rows, cols, indexing="ij")
    flat = frames.reshape(-1, in_h, in_w)
    resized = np.stack([ndimage.map_coordinates(img, grid, order=1, mode="nearest") for img in flat])
    return resized.reshape(frames.shape[:-2] + (out_size, out_size))


def visual_augment(frames: np.ndarray, plan: Optional[Union[AugmentationPlan, VisualAugmentPlan]],
                   seed: int) -> np.ndarray:
    """
    Apply one flip, rotation and crop, drawn per clip, to every frame.

    Args:
        frames: Faces of shape (T, 1, H, W) with values in [0, 1]
        plan: Visual augmentation settings (None leaves frames unchanged)
        seed: Per-clip seed

    Returns:
        Augmented float32 frames of the same shape
    """
    frames = np.asarray(frames, dtype=np.float32)
    if isinstance(plan, AugmentationPlan):
        plan = plan.visual
    if plan is None:
        return frames.copy()

    rng = np.random.default_rng(seed)
    flip = bool(rng.random() < plan.flip_prob)
    angle = float(rng.uniform(-plan.rotate_deg_max, plan.rotate_deg_max))
    scale = float(rng.uniform(plan.crop_scale_min, 1.0))
    h = frames.shape[-2]
    size = max(1, min(h, int(round(h * scale))))
    top = int(rng.integers(0, h - size + 1))
    left = int(rng.integers(0, frames.shape[-1] - size + 1))

    out = flip_frames(frames) if flip else frames.copy()
    if plan.rotate_deg_max > 0 and angle != 0.0:
        out = ndimage.rotate(out, angle, axes=(-1, -2), reshape=False, order=1, mode="constant", cval=0.0)
    if size < h:
        out = resize_frames(out[..., top:top + size, left:left + size], h)
    return np.clip(out, 0.0, 1.0).astype(np.float32)
