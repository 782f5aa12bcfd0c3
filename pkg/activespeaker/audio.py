"""
Audio temporal encoder: dilated 2-D residual stack with squeeze-and-excitation.
"""

import logging
from typing import Optional

import numpy as np

from . import functional as F
from .config import MFCC_PER_VIDEO_FRAME, AudioBlockSpec, AudioEncoderConfig
from .exceptions import InvalidArgumentError
from .nn import BatchNorm, Conv2d, Linear, Module, ModuleList
from .tensor import Tensor, as_tensor

logger = logging.getLogger(__name__)

SE_POOLS = ("global", "frequency")


class SqueezeExcite(Module):
    """
    Channel re-weighting: pool -> Linear(C, C/r) -> ReLU -> Linear(C/r, C) -> sigmoid -> scale.

    With pool='global' the squeeze averages every spatial position of a
    (N, C, H, W) input. With pool='frequency' it averages only the last axis,
    producing one set of channel weights per time step.
    """

    def __init__(self, channels: int, reduction: int, rng: np.random.Generator, pool: str = "global"):
        super().__init__()
        if reduction < 1 or channels % reduction:
            raise InvalidArgumentError(f"SE: {channels} channels not divisible by reduction {reduction}")
        if pool not in SE_POOLS:
            raise InvalidArgumentError(f"SE pool must be one of {SE_POOLS}, got '{pool}'")
        self.pool = pool
        self.fc1 = Linear(channels, channels // reduction, rng)
        self.fc2 = Linear(channels // reduction, channels, rng)

    def excitation(self, squeezed):
        return F.sigmoid(self.fc2(F.relu(self.fc1(squeezed))))

    def forward(self, x):
        x = as_tensor(x)
        unbatched = x.ndim == 3
        if unbatched:
            x = x.reshape((1,) + x.shape)
        n, c, h, _ = x.shape
        if self.pool == "global":
            weights = self.excitation(x.mean(axis=(2, 3))).reshape(n, c, 1, 1)
        else:
            squeezed = x.mean(axis=3).transpose(0, 2, 1)
            weights = self.excitation(squeezed).transpose(0, 2, 1).reshape(n, c, h, 1)
        out = x * weights
        return out.reshape(out.shape[1:]) if unbatched else out


def squeeze_excite(features, reduction: int, module: Optional[SqueezeExcite] = None, seed: int = 0) -> Tensor:
    """Apply squeeze-and-excitation to a (C, H, W) or (N, C, H, W) tensor."""
    features = as_tensor(features)
    if module is None:
        module = SqueezeExcite(features.shape[-3], reduction, np.random.default_rng(seed))
    return module(features)


class AudioResBlock(Module):
    def __init__(self, in_channels: int, spec: AudioBlockSpec, se_reduction: int, rng: np.random.Generator):
        super().__init__()
        out = spec.channels
        self.conv1 = Conv2d(in_channels, out, (spec.time_kernel, 3), rng, stride=(spec.stride, 1),
                            dilation=(spec.dilation1, 1),
                            padding=((spec.time_kernel - 1) * spec.dilation1 // 2, 1), bias=False)
        self.bn1 = BatchNorm(out)
        self.conv2 = Conv2d(out, out, (3, 3), rng, dilation=(spec.dilation2, 1),
                            padding=(spec.dilation2, 1), bias=False)
        self.bn2 = BatchNorm(out)
        self.se = SqueezeExcite(out, se_reduction, rng, pool="frequency")
        self.shortcut: Optional[Conv2d] = None
        self.shortcut_bn: Optional[BatchNorm] = None
        if spec.stride != 1 or in_channels != out:
            self.shortcut = Conv2d(in_channels, out, 1, rng, stride=(spec.stride, 1), bias=False)
            self.shortcut_bn = BatchNorm(out)

    def forward(self, x):
        y = F.relu(self.bn1(self.conv1(x)))
        y = self.se(self.bn2(self.conv2(y)))
        identity = x if self.shortcut is None else self.shortcut_bn(self.shortcut(x))
        return F.relu(y + identity)


class AudioEncoder(Module):
    """Maps MFCCs (N, 4T, 13) to audio embeddings (N, T, 128)."""

    def __init__(self, cfg: AudioEncoderConfig, rng: np.random.Generator):
        super().__init__()
        if cfg.time_stride_total != MFCC_PER_VIDEO_FRAME:
            raise InvalidArgumentError(
                f"Audio layout downsamples time by {cfg.time_stride_total}, expected {MFCC_PER_VIDEO_FRAME}"
            )
        self.cfg = cfg
        self.stem = Conv2d(1, cfg.stem_channels, (cfg.stem_kernel, 3), rng, padding="same", bias=False)
        self.stem_bn = BatchNorm(cfg.stem_channels)
        self.blocks = ModuleList()
        channels = cfg.stem_channels
        for spec in cfg.blocks:
            self.blocks.append(AudioResBlock(channels, spec, cfg.se_reduction, rng))
            channels = spec.channels
        self.proj = Linear(channels, cfg.output_dim, rng)

    def forward(self, mfcc) -> Tensor:
        """
        Args:
            mfcc: Tensor of shape (N, 4T, 13) or (4T, 13)

        Returns:
            Tensor of shape (N, T, 128) or (T, 128)

        Raises:
            InvalidArgumentError: If the frame count is not a positive multiple of 4
        """
        x = as_tensor(mfcc)
        unbatched = x.ndim == 2
        if unbatched:
            x = x.reshape((1,) + x.shape)
        if x.ndim != 3 or x.shape[2] != self.cfg.n_mfcc:
            raise InvalidArgumentError(f"Expected MFCCs of shape (N, 4T, {self.cfg.n_mfcc}), got {x.shape}")
        if x.shape[1] == 0 or x.shape[1] % MFCC_PER_VIDEO_FRAME:
            raise InvalidArgumentError(
                f"MFCC length {x.shape[1]} is not a positive multiple of {MFCC_PER_VIDEO_FRAME}"
            )
        n, length, n_mfcc = x.shape
        x = F.relu(self.stem_bn(self.stem(x.reshape(n, 1, length, n_mfcc))))
        for block in self.blocks:
            x = block(x)
        x = x.mean(axis=3).transpose(0, 2, 1)
        out = self.proj(x)
        return out.reshape(out.shape[1:]) if unbatched else out


def encode_audio(mfcc, cfg: AudioEncoderConfig, encoder: Optional[AudioEncoder] = None, seed: int = 0) -> Tensor:
    """Encode MFCCs into a (T, 128) or (N, T, 128) audio embedding sequence."""
    if encoder is None:
        encoder = AudioEncoder(cfg, np.random.default_rng(seed))
    return encoder(mfcc)
