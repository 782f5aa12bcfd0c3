"""
Configuration dataclasses and the shipped paper / desk presets.
"""

import dataclasses
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from .exceptions import InvalidArgumentError
from .receptive_field import LayerSpec, total_stride

SCALES = ("paper", "desk")
SCALE_ALIASES = {"full": "paper"}
FIXED_FRAME_CHOICES = (5, 10, 25, 50, 100)

VIDEO_FPS = 25.0
SAMPLE_RATE = 16000
MFCC_HOP_MS = 10.0
MFCC_PER_VIDEO_FRAME = 4
FACE_SIZE = 112
EMBED_DIM = 128


def canonical_scale(scale: str) -> str:
    """Preset name for scale; 'full' is accepted for 'paper'."""
    scale = SCALE_ALIASES.get(scale, scale)
    if scale not in SCALES:
        choices = ", ".join(SCALES + tuple(SCALE_ALIASES))
        raise InvalidArgumentError(f"Unknown scale '{scale}'. Expected one of: {choices}")
    return scale


@dataclass
class VisualEncoderConfig:
    """Layout of the visual frontend, per-frame trunk and V-TCN."""

    scale: str = "desk"
    frontend_channels: int = 8
    frontend_temporal_kernel: int = 5
    frontend_spatial_kernel: int = 7
    trunk_channels: List[int] = field(default_factory=lambda: [8, 16, 32, 64])
    trunk_blocks: List[int] = field(default_factory=lambda: [2, 2, 2, 2])
    vtcn_blocks: int = 5
    vtcn_kernel: int = 3
    final_conv_kernel: int = 7
    output_dim: int = EMBED_DIM
    image_size: int = FACE_SIZE

    def temporal_specs(self) -> List[LayerSpec]:
        """Layers that mix information across frames, input to output."""
        specs = [LayerSpec(self.frontend_temporal_kernel)]
        specs += [LayerSpec(self.vtcn_kernel) for _ in range(self.vtcn_blocks)]
        specs.append(LayerSpec(self.final_conv_kernel))
        return specs

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "VisualEncoderConfig":
        return cls(**data)


@dataclass
class AudioBlockSpec:
    """
    One residual block of the audio stack.

    The first conv has time kernel `time_kernel`, carries the block stride and
    dilation1; the second conv has time kernel 3 and dilation2. Both use a
    frequency kernel of 3 with stride 1.
    """

    channels: int
    stride: int = 1
    time_kernel: int = 3
    dilation1: int = 1
    dilation2: int = 1


@dataclass
class AudioEncoderConfig:
    """Layout of the 2-D residual audio stack over (time, cepstral) axes."""

    scale: str = "desk"
    n_mfcc: int = 13
    stem_channels: int = 8
    stem_kernel: int = 3
    blocks: List[AudioBlockSpec] = field(default_factory=list)
    se_reduction: int = 4
    output_dim: int = EMBED_DIM

    def temporal_specs(self) -> List[LayerSpec]:
        specs = [LayerSpec(self.stem_kernel)]
        for block in self.blocks:
            specs.append(LayerSpec(block.time_kernel, block.stride, block.dilation1))
            specs.append(LayerSpec(3, 1, block.dilation2))
        return specs

    @property
    def time_stride_total(self) -> int:
        return total_stride(self.temporal_specs())

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "AudioEncoderConfig":
        data = dict(data)
        data["blocks"] = [AudioBlockSpec(**b) for b in data.get("blocks", [])]
        return cls(**data)


@dataclass
class ModelConfig:
    """End-to-end network configuration."""

    scale: str = "desk"
    visual: VisualEncoderConfig = field(default_factory=VisualEncoderConfig)
    audio: AudioEncoderConfig = field(default_factory=AudioEncoderConfig)
    d_model: int = EMBED_DIM
    n_heads: int = 8
    ffn_multiplier: int = 4
    use_cross_attention: bool = True
    use_self_attention: bool = True
    seed: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelConfig":
        data = dict(data)
        data["visual"] = VisualEncoderConfig.from_dict(data.get("visual", {}))
        data["audio"] = AudioEncoderConfig.from_dict(data.get("audio", {}))
        return cls(**data)


@dataclass
class VisualAugmentPlan:
    flip_prob: float = 0.5
    rotate_deg_max: float = 15.0
    crop_scale_min: float = 0.85

    def __post_init__(self):
        if not 0.0 <= self.flip_prob <= 1.0:
            raise InvalidArgumentError(f"flip_prob must be in [0, 1], got {self.flip_prob}")
        if not 0.0 < self.crop_scale_min <= 1.0:
            raise InvalidArgumentError(f"crop_scale_min must be in (0, 1], got {self.crop_scale_min}")
        if self.rotate_deg_max < 0:
            raise InvalidArgumentError(f"rotate_deg_max must be >= 0, got {self.rotate_deg_max}")


@dataclass
class AugmentationPlan:
    """
    Which augmentations run during training.

    neg_sampling overlays another batch item's audio; noise_dir enables the
    external-noise arm. Visual augmentation is disabled by passing visual=None.
    """

    neg_sampling: bool = True
    snr_db_range: Tuple[float, float] = (0.0, 15.0)
    noise_dir: Optional[str] = None
    visual: Optional[VisualAugmentPlan] = field(default_factory=VisualAugmentPlan)
    seed: int = 0

    def __post_init__(self):
        low, high = self.snr_db_range
        if low > high:
            raise InvalidArgumentError(f"snr_db_range low {low} exceeds high {high}")
        self.snr_db_range = (float(low), float(high))

    @property
    def mode(self) -> str:
        if self.neg_sampling:
            return "neg"
        return "noise" if self.noise_dir else "none"

    def to_dict(self) -> Dict[str, Any]:
        data = dataclasses.asdict(self)
        data["snr_db_range"] = list(self.snr_db_range)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "AugmentationPlan":
        data = dict(data)
        if data.get("visual") is not None:
            data["visual"] = VisualAugmentPlan(**data["visual"])
        if "snr_db_range" in data:
            data["snr_db_range"] = tuple(data["snr_db_range"])
        return cls(**data)

    @classmethod
    def for_mode(cls, mode: str, noise_dir: Optional[str] = None, seed: int = 0) -> "AugmentationPlan":
        """Build the plan for one arm of the augmentation comparison ('neg', 'noise' or 'none')."""
        if mode == "neg":
            return cls(neg_sampling=True, seed=seed)
        if mode == "noise":
            if not noise_dir:
                raise InvalidArgumentError("The 'noise' augmentation arm needs a noise directory")
            return cls(neg_sampling=False, noise_dir=str(noise_dir), seed=seed)
        if mode == "none":
            return cls(neg_sampling=False, seed=seed)
        raise InvalidArgumentError(f"Unknown augmentation mode '{mode}'. Expected neg, noise or none")


@dataclass
class TrainConfig:
    lr0: float = 1e-4
    lr_decay_per_epoch: float = 0.95
    epochs: int = 20
    batch_size: int = 4
    seed: int = 0
    model_scale: str = "desk"
    augmentation: AugmentationPlan = field(default_factory=AugmentationPlan)
    fixed_frames: Optional[int] = None
    num_workers: int = 1
    eval_noise_snr: Optional[float] = None

    def __post_init__(self):
        self.model_scale = canonical_scale(self.model_scale)
        if self.lr0 <= 0:
            raise InvalidArgumentError(f"lr0 must be positive, got {self.lr0}")
        if not 0.0 < self.lr_decay_per_epoch <= 1.0:
            raise InvalidArgumentError(f"lr_decay_per_epoch must be in (0, 1], got {self.lr_decay_per_epoch}")
        if self.batch_size < 1 or self.epochs < 0:
            raise InvalidArgumentError("batch_size must be >= 1 and epochs >= 0")
        if self.fixed_frames is not None and self.fixed_frames < 1:
            raise InvalidArgumentError(f"fixed_frames must be >= 1, got {self.fixed_frames}")

    def to_dict(self) -> Dict[str, Any]:
        data = dataclasses.asdict(self)
        data["augmentation"] = self.augmentation.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainConfig":
        data = dict(data)
        if isinstance(data.get("augmentation"), dict):
            data["augmentation"] = AugmentationPlan.from_dict(data["augmentation"])
        return cls(**data)


def visual_config(scale: str = "desk") -> VisualEncoderConfig:
    """Visual encoder preset; desk divides every channel count by 8."""
    if canonical_scale(scale) == "paper":
        return VisualEncoderConfig(scale="paper", frontend_channels=64, trunk_channels=[64, 128, 256, 512])
    return VisualEncoderConfig(scale="desk")


def audio_config(scale: str = "desk") -> AudioEncoderConfig:
    """
    Audio encoder preset.

    Two stride-2 stages bring 4T MFCC frames down to T; the remaining reach
    comes from dilated second convs, giving 189 frames at paper scale.
    """
    if canonical_scale(scale) == "paper":
        blocks = (
            [AudioBlockSpec(32) for _ in range(3)]
            + [AudioBlockSpec(64, stride=2)]
            + [AudioBlockSpec(64) for _ in range(2)]
            + [AudioBlockSpec(64, dilation2=2)]
            + [AudioBlockSpec(128, stride=2)]
            + [AudioBlockSpec(128) for _ in range(5)]
            + [AudioBlockSpec(256, time_kernel=1, dilation2=2) for _ in range(3)]
        )
        return AudioEncoderConfig(scale="paper", stem_channels=32, blocks=blocks, se_reduction=16)
    blocks = [
        AudioBlockSpec(8),
        AudioBlockSpec(8, stride=2, dilation2=2),
        AudioBlockSpec(16, stride=2),
        AudioBlockSpec(16, time_kernel=1, dilation2=2),
    ]
    return AudioEncoderConfig(scale="desk", stem_channels=8, blocks=blocks, se_reduction=4)


def model_config(scale: str = "desk", **overrides) -> ModelConfig:
    scale = canonical_scale(scale)
    cfg = ModelConfig(scale=scale, visual=visual_config(scale), audio=audio_config(scale))
    for key, value in overrides.items():
        if not hasattr(cfg, key):
            raise InvalidArgumentError(f"Unknown model option '{key}'")
        setattr(cfg, key, value)
    return cfg
