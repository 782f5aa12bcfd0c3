"""
activespeaker - audio-visual active speaker detection on a small numpy autodiff core.
"""

from .attention import CrossAttention, SelfAttention, fuse, scaled_dot_attention
from .audio import AudioEncoder, encode_audio, squeeze_excite
from .augmentation import external_noise_mix, negative_sample_mix, visual_augment
from .classifier import Classifier, frame_cross_entropy, predict
from .config import AugmentationPlan, ModelConfig, TrainConfig, model_config
from .evaluation import ScoreTable, average_precision, breakdown, f1_score, roc_auc
from .exceptions import (
    ActiveSpeakerError,
    ColumnNotFoundError,
    FileReadError,
    InvalidArgumentError,
    NumericError,
    UndefinedMetricError,
    UsageError,
)
from .features import Waveform, align_lengths, extract_mfcc
from .gradcheck import grad_check
from .model import ActiveSpeakerModel, receptive_fields
from .optim import Adam, adam_step, lr_at_epoch
from .receptive_field import LayerSpec, compute_receptive_field
from .synthetic import FaceTrackClip, build_dataset, render_clip, sample_openness
from .tensor import OpGraph, Tensor, backward, no_grad, set_precision
from .trainer import evaluate, infer, load_checkpoint, save_checkpoint, train
from .visual import VisualEncoder, encode_visual

__version__ = "0.1.0"

__all__ = [
    "Tensor",
    "OpGraph",
    "backward",
    "no_grad",
    "set_precision",
    "grad_check",
    "LayerSpec",
    "compute_receptive_field",
    "Waveform",
    "extract_mfcc",
    "align_lengths",
    "VisualEncoder",
    "encode_visual",
    "AudioEncoder",
    "encode_audio",
    "squeeze_excite",
    "scaled_dot_attention",
    "CrossAttention",
    "SelfAttention",
    "fuse",
    "Classifier",
    "predict",
    "frame_cross_entropy",
    "ActiveSpeakerModel",
    "receptive_fields",
    "negative_sample_mix",
    "external_noise_mix",
    "visual_augment",
    "FaceTrackClip",
    "sample_openness",
    "render_clip",
    "build_dataset",
    "ScoreTable",
    "average_precision",
    "f1_score",
    "roc_auc",
    "breakdown",
    "adam_step",
    "Adam",
    "lr_at_epoch",
    "train",
    "evaluate",
    "infer",
    "save_checkpoint",
    "load_checkpoint",
    "AugmentationPlan",
    "ModelConfig",
    "TrainConfig",
    "model_config",
    "ActiveSpeakerError",
    "InvalidArgumentError",
    "NumericError",
    "UndefinedMetricError",
    "UsageError",
    "FileReadError",
    "ColumnNotFoundError",
]
