"""
Visual temporal encoder: 3-D conv frontend, per-frame residual trunk and V-TCN.
"""

import logging
from typing import Optional

import numpy as np

from . import functional as F
from .config import VisualEncoderConfig
from .exceptions import InvalidArgumentError
from .nn import BatchNorm, Conv1d, Conv2d, Conv3d, Module, ModuleList
from .tensor import Tensor, as_tensor

logger = logging.getLogger(__name__)


class BasicBlock(Module):
    """Two 3x3 convs with batch norm and an identity (or 1x1 projected) shortcut."""

    def __init__(self, in_channels: int, out_channels: int, stride: int, rng: np.random.Generator):
        super().__init__()
        self.conv1 = Conv2d(in_channels, out_channels, 3, rng, stride=stride, padding=1, bias=False)
        self.bn1 = BatchNorm(out_channels)
        self.conv2 = Conv2d(out_channels, out_channels, 3, rng, padding=1, bias=False)
        self.bn2 = BatchNorm(out_channels)
        self.shortcut: Optional[Conv2d] = None
        self.shortcut_bn: Optional[BatchNorm] = None
        if stride != 1 or in_channels != out_channels:
            self.shortcut = Conv2d(in_channels, out_channels, 1, rng, stride=stride, bias=False)
            self.shortcut_bn = BatchNorm(out_channels)

    def forward(self, x):
        out = F.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        identity = x if self.shortcut is None else self.shortcut_bn(self.shortcut(x))
        return F.relu(out + identity)


class VTCNBlock(Module):
    """ReLU -> BN -> depthwise conv -> pointwise conv, added back to the input."""

    def __init__(self, channels: int, kernel_size: int, rng: np.random.Generator):
        super().__init__()
        self.bn = BatchNorm(channels)
        self.depthwise = Conv1d(channels, channels, kernel_size, rng, padding="same", groups=channels)
        self.pointwise = Conv1d(channels, channels, 1, rng)

    def forward(self, x):
        return x + self.pointwise(self.depthwise(self.bn(F.relu(x))))


class VisualEncoder(Module):
    """
    Maps face crops (N, T, 1, 112, 112) to visual embeddings (N, T, 128).

    The 3-D conv is the only layer of the frontend that mixes frames; the
    trunk runs on each frame independently with time folded into the batch.
    """

    def __init__(self, cfg: VisualEncoderConfig, rng: np.random.Generator):
        super().__init__()
        self.cfg = cfg
        kt, ks = cfg.frontend_temporal_kernel, cfg.frontend_spatial_kernel
        self.conv3d = Conv3d(1, cfg.frontend_channels, (kt, ks, ks), rng, stride=(1, 2, 2),
                             padding=((kt - 1) // 2, ks // 2, ks // 2), bias=False)
        self.bn3d = BatchNorm(cfg.frontend_channels)

        self.trunk = ModuleList()
        channels = cfg.frontend_channels
        for stage, (width, n_blocks) in enumerate(zip(cfg.trunk_channels, cfg.trunk_blocks)):
            for b in range(n_blocks):
                stride = 2 if stage > 0 and b == 0 else 1
                self.trunk.append(BasicBlock(channels, width, stride, rng))
                channels = width
        self.trunk_channels = channels

        self.vtcn = ModuleList([VTCNBlock(channels, cfg.vtcn_kernel, rng) for _ in range(cfg.vtcn_blocks)])
        self.final_conv = Conv1d(channels, cfg.output_dim, cfg.final_conv_kernel, rng, padding="same")

    def _check_faces(self, faces: Tensor) -> None:
        size = self.cfg.image_size
        if faces.ndim != 5 or faces.shape[2] != 1:
            raise InvalidArgumentError(f"Expected faces of shape (N, T, 1, {size}, {size}), got {faces.shape}")
        if faces.shape[3:] != (size, size):
            raise InvalidArgumentError(
                f"Expected {size}x{size} faces, got {faces.shape[3]}x{faces.shape[4]}"
            )
        if faces.shape[1] < 1:
            raise InvalidArgumentError("Face sequence must contain at least one frame")

    def frontend(self, faces) -> Tensor:
        """
        Per-frame spatial embedding.

        Args:
            faces: Tensor of shape (N, T, 1, H, W) or (T, 1, H, W)

        Returns:
            Tensor of shape (N, T, C) or (T, C)
        """
        faces = as_tensor(faces)
        unbatched = faces.ndim == 4
        if unbatched:
            faces = faces.reshape((1,) + faces.shape)
        self._check_faces(faces)
        n, t = faces.shape[:2]

        x = faces.transpose(0, 2, 1, 3, 4)
        x = F.relu(self.bn3d(self.conv3d(x)))
        c, h, w = x.shape[1], x.shape[3], x.shape[4]
        x = x.transpose(0, 2, 1, 3, 4).reshape(n * t, c, h, w)
        x = F.max_pool(x, (3, 3), stride=(2, 2), padding=(1, 1))
        for block in self.trunk:
            x = block(x)
        x = x.mean(axis=(2, 3)).reshape(n, t, self.trunk_channels)
        return x.reshape(t, self.trunk_channels) if unbatched else x

    def temporal(self, per_frame) -> Tensor:
        """
        V-TCN followed by the reducing Conv1D.

        Args:
            per_frame: Tensor of shape (N, T, C) or (T, C)

        Returns:
            Tensor of shape (N, T, 128) or (T, 128)
        """
        x = as_tensor(per_frame)
        unbatched = x.ndim == 2
        if unbatched:
            x = x.reshape((1,) + x.shape)
        if x.ndim != 3 or x.shape[2] != self.trunk_channels or x.shape[1] < 1:
            raise InvalidArgumentError(f"Expected per-frame features (N, T, {self.trunk_channels}), got {x.shape}")
        x = x.transpose(0, 2, 1)
        for block in self.vtcn:
            x = block(x)
        x = self.final_conv(x).transpose(0, 2, 1)
        return x.reshape(x.shape[1:]) if unbatched else x

    def forward(self, faces) -> Tensor:
        return self.temporal(self.frontend(faces))


def encode_visual(faces, cfg: VisualEncoderConfig, encoder: Optional[VisualEncoder] = None,
                  seed: int = 0) -> Tensor:
    """Encode faces into a (T, 128) or (N, T, 128) visual embedding sequence."""
    if encoder is None:
        encoder = VisualEncoder(cfg, np.random.default_rng(seed))
    return encoder(faces)
