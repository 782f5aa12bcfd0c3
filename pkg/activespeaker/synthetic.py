"""
Synthetic face-track generator covering the five audio / lip-motion / sync conditions.

A clip is driven by a smooth mouth-openness trajectory. The mouth height in
the rendered face follows it, and the audio is white noise whose per-frame
envelope either follows the same trajectory (speaking), an independent one,
or is silent.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import ndimage
from scipy.signal import get_window

from .augmentation import resize_frames
from .config import FACE_SIZE, SAMPLE_RATE, VIDEO_FPS
from .exceptions import InvalidArgumentError
from .features import Waveform, align_lengths
from .utils import derive_seeds
from .writers import save_csv_file, write_tensor, write_wav

logger = logging.getLogger(__name__)

CONDITIONS = {
    1: "active, moving, in sync",
    2: "active, moving, out of sync",
    3: "active, static mouth",
    4: "silent, moving",
    5: "silent, static mouth",
}
SPEAKING_CONDITION = 1
STATIC_MOUTH = {3, 5}
SILENT_AUDIO = {4, 5}

SMOOTHING_FRAMES = 11
STATIC_OPENNESS = 0.2
AUDIO_AMPLITUDE = 0.3
FACE_WIDTHS = (48, 96, 160)
MAX_FACES = 3

# Face template geometry in pixels of the 112 x 112 crop
FACE_CENTER = (56.0, 56.0)
FACE_RADII = (50.0, 40.0)
MOUTH_ROW = 80.0
MOUTH_HALF_WIDTH = 15
MOUTH_MIN_HEIGHT = 2.0
MOUTH_MAX_EXTRA = 14.0

SPEAKING_LABEL = "SPEAKING_AUDIBLE"
NOT_SPEAKING_LABEL = "NOT_SPEAKING"


@dataclass
class FaceTrackClip:
    """One labeled face track: T frames, the aligned waveform and T labels."""

    clip_id: str
    faces: np.ndarray
    audio: Waveform
    labels: np.ndarray
    condition: int
    meta: Dict[str, int] = field(default_factory=dict)
    openness: Optional[np.ndarray] = None
    envelope: Optional[np.ndarray] = None

    @property
    def n_frames(self) -> int:
        return len(self.labels)


def sample_openness(T: int, seed: int) -> np.ndarray:
    """
    Smooth mouth-openness trajectory in [0, 1].

    Uniform noise is low-pass filtered with a Hann window and min-max
    rescaled; a constant result maps to 0.5.
    """
    if T < 1:
        raise InvalidArgumentError(f"T must be >= 1, got {T}")
    rng = np.random.default_rng(seed)
    window = get_window("hann", SMOOTHING_FRAMES, fftbins=False)
    noise = rng.uniform(0.0, 1.0, T + SMOOTHING_FRAMES - 1)
    smooth = np.convolve(noise, window / window.sum(), mode="valid")
    span = smooth.max() - smooth.min()
    if span <= 1e-12:
        return np.full(T, 0.5)
    return (smooth - smooth.min()) / span


def _face_template(brightness: float) -> np.ndarray:
    rows, cols = np.mgrid[0:FACE_SIZE, 0:FACE_SIZE].astype(np.float64)
    (cy, cx), (ry, rx) = FACE_CENTER, FACE_RADII
    inside = ((rows - cy) / ry) ** 2 + ((cols - cx) / rx) ** 2 <= 1.0
    img = np.full((FACE_SIZE, FACE_SIZE), 0.15 * brightness)
    img[inside] = 0.7 * brightness
    for eye_col in (cx - 15.0, cx + 15.0):
        img[((rows - 40.0) ** 2 + (cols - eye_col) ** 2) <= 16.0] = 0.25 * brightness
    return img


def render_faces(openness: np.ndarray, brightness: float = 1.0) -> np.ndarray:
    """
    Render a (T, 1, 112, 112) face sequence whose mouth height follows openness.

    Mouth edges at fractional rows are anti-aliased by row coverage.
    """
    template = _face_template(brightness)
    heights = MOUTH_MIN_HEIGHT + MOUTH_MAX_EXTRA * np.asarray(openness, dtype=np.float64)
    top = MOUTH_ROW - heights / 2.0
    bottom = MOUTH_ROW + heights / 2.0
    rows = np.arange(FACE_SIZE, dtype=np.float64)
    coverage = np.clip(np.minimum(bottom[:, None], rows[None, :] + 1.0) - np.maximum(top[:, None], rows[None, :]),
                       0.0, 1.0)
    frames = np.repeat(template[None], len(heights), axis=0)
    c0, c1 = int(FACE_CENTER[1]) - MOUTH_HALF_WIDTH, int(FACE_CENTER[1]) + MOUTH_HALF_WIDTH
    mouth_value = 0.1 * brightness
    band = frames[:, :, c0:c1]
    cov = coverage[:, :, None]
    frames[:, :, c0:c1] = band * (1.0 - cov) + mouth_value * cov
    return np.clip(frames, 0.0, 1.0)[:, None].astype(np.float32)


def degrade_face_size(frames: np.ndarray, face_width_px: int) -> np.ndarray:
    """Simulate a face captured at face_width_px by blurring, downscaling and upscaling back."""
    if face_width_px >= FACE_SIZE:
        return frames
    factor = FACE_SIZE / float(face_width_px)
    blurred = ndimage.gaussian_filter(frames, sigma=(0, 0, 0.5 * factor, 0.5 * factor))
    small = resize_frames(blurred, face_width_px)
    return np.clip(resize_frames(small, FACE_SIZE), 0.0, 1.0).astype(np.float32)


def _lagged(trajectory: np.ndarray, lag: int) -> np.ndarray:
    if lag == 0:
        return trajectory
    idx = np.clip(np.arange(len(trajectory)) - lag, 0, len(trajectory) - 1)
    return trajectory[idx]


def render_clip(condition: int, T: int, fps: float = VIDEO_FPS, sr: int = SAMPLE_RATE, seed: int = 0,
                clip_id: Optional[str] = None, face_width_px: Optional[int] = None,
                n_faces: Optional[int] = None, sync_lag_frames: int = 0) -> FaceTrackClip:
    """
    Render one clip of the given condition.

    Args:
        condition: 1 (speaking) to 5, see CONDITIONS
        T: Number of video frames
        fps: Video frame rate
        sr: Audio sample rate
        seed: Clip seed; the output is a pure function of the arguments
        clip_id: Identifier (defaults to 'clip-<seed>')
        face_width_px: Simulated face width; drawn from FACE_WIDTHS when None
        n_faces: Faces in the simulated scene; drawn from 1..3 when None
        sync_lag_frames: Audio envelope delay relative to the mouth for condition 1

    Returns:
        FaceTrackClip with labels all 1 for condition 1 and all 0 otherwise

    Raises:
        InvalidArgumentError: For an unknown condition or T < 1
    """
    if condition not in CONDITIONS:
        raise InvalidArgumentError(f"Invalid condition {condition!r}. Expected one of {sorted(CONDITIONS)}")
    if T < 1:
        raise InvalidArgumentError(f"T must be >= 1, got {T}")

    mouth_seed, audio_seed, carrier_seed, meta_seed = derive_seeds(seed, 4)
    meta_rng = np.random.default_rng(meta_seed)
    brightness = float(meta_rng.uniform(0.85, 1.15))
    drawn_width = int(meta_rng.choice(FACE_WIDTHS))
    drawn_faces = int(meta_rng.integers(1, MAX_FACES + 1))
    face_width_px = drawn_width if face_width_px is None else int(face_width_px)
    n_faces = drawn_faces if n_faces is None else int(n_faces)

    openness = sample_openness(T, mouth_seed)
    independent = sample_openness(T, audio_seed)
    mouth = np.full(T, STATIC_OPENNESS) if condition in STATIC_MOUTH else openness

    if condition in SILENT_AUDIO:
        envelope = np.zeros(T)
    elif condition == SPEAKING_CONDITION:
        envelope = _lagged(openness, sync_lag_frames)
    else:
        envelope = independent

    samples_per_frame = int(round(sr / fps))
    carrier = np.random.default_rng(carrier_seed).uniform(-1.0, 1.0, T * samples_per_frame)
    samples = AUDIO_AMPLITUDE * np.repeat(envelope, samples_per_frame) * carrier
    audio = align_lengths(Waveform(samples, sr), fps, T, sample_rate=sr)

    faces = degrade_face_size(render_faces(mouth, brightness), face_width_px)
    labels = np.full(T, 1 if condition == SPEAKING_CONDITION else 0, dtype=np.int64)
    return FaceTrackClip(
        clip_id=clip_id or f"clip-{seed}",
        faces=faces,
        audio=audio,
        labels=labels,
        condition=condition,
        meta={"face_width_px": face_width_px, "n_faces_in_scene": n_faces},
        openness=mouth,
        envelope=envelope,
    )


def allocate_counts(n: int, mix: Mapping[int, float]) -> Dict[int, int]:
    """Split n clips over conditions by largest remainder, ties broken by condition number."""
    raw = {c: n * p for c, p in mix.items()}
    counts = {c: int(np.floor(v)) for c, v in raw.items()}
    leftover = n - sum(counts.values())
    for c in sorted(raw, key=lambda c: (-(raw[c] - counts[c]), c))[:leftover]:
        counts[c] += 1
    return counts


def parse_mix(text: str) -> Dict[int, float]:
    """
    Parse '1:0.5,2:0.5' into {1: 0.5, 2: 0.5}.

    Raises:
        InvalidArgumentError: If the text is malformed or the mix is invalid
    """
    mix = {}
    try:
        for part in text.split(","):
            cond, weight = part.split(":")
            mix[int(cond)] = float(weight)
    except ValueError:
        raise InvalidArgumentError(f"Cannot parse condition mix '{text}'. Expected e.g. '1:0.5,2:0.5'")
    check_mix(mix)
    return mix


def check_mix(mix: Mapping[int, float]) -> None:
    if not mix:
        raise InvalidArgumentError("Condition mix is empty")
    for cond, weight in mix.items():
        if cond not in CONDITIONS:
            raise InvalidArgumentError(f"Invalid condition {cond} in mix")
        if weight < 0:
            raise InvalidArgumentError(f"Negative proportion {weight} for condition {cond}")
    total = sum(mix.values())
    if abs(total - 1.0) > 1e-6:
        raise InvalidArgumentError(f"Condition proportions must sum to 1, got {total:.6f}")


def clip_annotation_rows(clip: FaceTrackClip, fps: float) -> List[dict]:
    (cy, cx), (ry, rx) = FACE_CENTER, FACE_RADII
    box = ((cx - rx) / FACE_SIZE, (cy - ry) / FACE_SIZE, (cx + rx) / FACE_SIZE, (cy + ry) / FACE_SIZE)
    return [
        {
            "clip_id": clip.clip_id,
            "frame_timestamp_s": round(t / fps, 6),
            "x1": box[0], "y1": box[1], "x2": box[2], "y2": box[3],
            "label": SPEAKING_LABEL if clip.labels[t] else NOT_SPEAKING_LABEL,
            "track_id": f"{clip.clip_id}:0",
        }
        for t in range(clip.n_frames)
    ]


def build_dataset(n_clips: int, condition_mix: Mapping[int, float], out_dir: Union[str, Path], seed: int = 0,
                  duration_range_s: Tuple[float, float] = (1.0, 6.0), fps: float = VIDEO_FPS,
                  sr: int = SAMPLE_RATE, sync_lag_frames: int = 0, workers: int = 1) -> Path:
    """
    Generate clips on disk with a manifest and an annotation CSV.

    Condition counts are allocated deterministically from the mix and the
    clip order is shuffled with the seed. Each clip writes its frames as a
    TNSR1 file and its audio as a 16-bit WAV under out_dir/clips.

    Args:
        n_clips: Number of clips
        condition_mix: Proportion per condition, summing to 1
        out_dir: Output directory
        seed: Root seed
        duration_range_s: Clip durations are drawn uniformly from this range
        fps: Video frame rate
        sr: Audio sample rate
        sync_lag_frames: Passed to render_clip
        workers: Threads used to render clips

    Returns:
        Path of manifest.csv

    Raises:
        InvalidArgumentError: For an invalid mix, n_clips < 1 or a bad duration range
        SaveError: If the output directory is not writable
    """
    if n_clips < 1:
        raise InvalidArgumentError(f"n_clips must be >= 1, got {n_clips}")
    check_mix(condition_mix)
    low, high = duration_range_s
    if low <= 0 or low > high:
        raise InvalidArgumentError(f"Invalid duration range {duration_range_s}")

    out_dir = Path(out_dir)
    rng = np.random.default_rng(seed)
    counts = allocate_counts(n_clips, condition_mix)
    conditions = np.array([c for c in sorted(counts) for _ in range(counts[c])])
    rng.shuffle(conditions)
    durations = rng.uniform(low, high, n_clips) if high > low else np.full(n_clips, low)
    clip_seeds = derive_seeds(seed, n_clips)

    def make(i: int) -> Tuple[dict, List[dict]]:
        clip_id = f"clip{i:05d}"
        T = max(1, int(round(durations[i] * fps)))
        clip = render_clip(int(conditions[i]), T, fps=fps, sr=sr, seed=clip_seeds[i], clip_id=clip_id,
                           sync_lag_frames=sync_lag_frames)
        faces_rel, audio_rel = f"clips/{clip_id}.tnsr", f"clips/{clip_id}.wav"
        write_tensor(clip.faces, out_dir / faces_rel)
        write_wav(clip.audio.samples, out_dir / audio_rel, sr)
        row = {
            "clip_id": clip_id,
            "condition": clip.condition,
            "n_frames": T,
            "fps": fps,
            "sample_rate": sr,
            "faces_path": faces_rel,
            "audio_path": audio_rel,
            "face_width_px": clip.meta["face_width_px"],
            "n_faces": clip.meta["n_faces_in_scene"],
            "label": int(clip.labels[0]),
        }
        return row, clip_annotation_rows(clip, fps)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(make, range(n_clips)))

    manifest = pd.DataFrame([row for row, _ in results])
    annotations = pd.DataFrame([a for _, rows in results for a in rows])
    manifest_path = out_dir / "manifest.csv"
    save_csv_file(manifest, manifest_path)
    save_csv_file(annotations, out_dir / "annotations.csv")

    frames_total = int(manifest["n_frames"].sum())
    speaking = int((manifest["n_frames"] * manifest["label"]).sum())
    logger.info("Wrote %d clips (%d frames, %.1f%% speaking) to %s", n_clips, frames_total,
                100.0 * speaking / max(frames_total, 1), out_dir)
    return manifest_path


def dataset_summary(manifest: pd.DataFrame) -> Dict[str, float]:
    frames = int(manifest["n_frames"].sum())
    speaking = int((manifest["n_frames"] * manifest["label"]).sum())
    per_condition = manifest.groupby("condition").size().to_dict()
    return {
        "clips": int(len(manifest)),
        "frames": frames,
        "speaking_fraction": speaking / frames if frames else 0.0,
        "clips_per_condition": {int(k): int(v) for k, v in per_condition.items()},
    }
