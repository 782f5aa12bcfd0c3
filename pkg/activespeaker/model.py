"""
End-to-end active speaker network: encoders, attention backend and classifier.
"""

import logging
from dataclasses import dataclass
from typing import Dict

import numpy as np

from .attention import CrossAttendedPair, CrossAttention, SelfAttention, fuse
from .audio import AudioEncoder
from .classifier import Classifier
from .config import MFCC_HOP_MS, VIDEO_FPS, ModelConfig
from .exceptions import InvalidArgumentError
from .nn import Linear, Module
from .receptive_field import compute_receptive_field
from .tensor import Tensor, as_tensor
from .visual import VisualEncoder

logger = logging.getLogger(__name__)


class CrossBypass(Module):
    """Stand-in for cross-attention: each stream plus a dimension-preserving projection of itself."""

    def __init__(self, d_model: int, rng: np.random.Generator):
        super().__init__()
        self.audio_proj = Linear(d_model, d_model, rng)
        self.visual_proj = Linear(d_model, d_model, rng)

    def forward(self, F_a, F_v) -> CrossAttendedPair:
        return CrossAttendedPair(F_a + self.audio_proj(F_a), F_v + self.visual_proj(F_v))


class SelfBypass(Module):
    """Stand-in for self-attention: the input plus a dimension-preserving projection of it."""

    def __init__(self, d_model: int, rng: np.random.Generator):
        super().__init__()
        self.proj = Linear(d_model, d_model, rng)

    def forward(self, F_av) -> Tensor:
        return F_av + self.proj(F_av)


@dataclass
class ForwardOutputs:
    F_a: Tensor
    F_v: Tensor
    F_av: Tensor
    scores: Tensor


class ActiveSpeakerModel(Module):
    """
    Faces (N, T, 1, 112, 112) and MFCCs (N, 4T, 13) to speaking scores (N, T).

    Submodules are created in a fixed order from one generator seeded by
    cfg.seed, so two models built from the same config are identical.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed)
        self.visual = VisualEncoder(cfg.visual, rng)
        self.audio = AudioEncoder(cfg.audio, rng)
        if cfg.use_cross_attention:
            self.cross = CrossAttention(cfg.d_model, cfg.n_heads, cfg.ffn_multiplier, rng)
        else:
            self.cross = CrossBypass(cfg.d_model, rng)
        joint = 2 * cfg.d_model
        if cfg.use_self_attention:
            self.backend = SelfAttention(joint, cfg.n_heads, cfg.ffn_multiplier, rng)
        else:
            self.backend = SelfBypass(joint, rng)
        self.classifier = Classifier(joint, rng)
        logger.debug("Built %s model with %d parameters", cfg.scale, self.num_parameters())

    def run(self, faces, mfcc) -> ForwardOutputs:
        faces, mfcc = as_tensor(faces), as_tensor(mfcc)
        F_v = self.visual(faces)
        F_a = self.audio(mfcc)
        if F_a.shape[:-1] != F_v.shape[:-1]:
            raise InvalidArgumentError(
                f"Audio embeddings cover {F_a.shape[-2]} frames but visual embeddings cover {F_v.shape[-2]}"
            )
        F_av = self.backend(fuse(self.cross(F_a, F_v)))
        return ForwardOutputs(F_a=F_a, F_v=F_v, F_av=F_av, scores=self.classifier(F_av))

    def forward(self, faces, mfcc) -> Tensor:
        return self.run(faces, mfcc).scores


def receptive_fields(cfg: ModelConfig) -> Dict[str, Dict[str, float]]:
    """Analytic temporal receptive fields of both encoders, in frames and milliseconds."""
    visual = compute_receptive_field(cfg.visual.temporal_specs())
    audio = compute_receptive_field(cfg.audio.temporal_specs())
    return {
        "visual": {"frames": visual, "ms": visual * 1000.0 / VIDEO_FPS},
        "audio": {"frames": audio, "ms": audio * MFCC_HOP_MS},
    }
