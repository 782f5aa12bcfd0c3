"""
Analytic receptive-field arithmetic for temporal convolution stacks.
"""

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

from .exceptions import InvalidArgumentError


@dataclass(frozen=True)
class LayerSpec:
    """
    Temporal footprint of one layer.

    Padding is the zero padding applied on each end of the temporal axis;
    'same' stacks use (kernel_size - 1) * dilation // 2.
    """

    kernel_size: int
    stride: int = 1
    dilation: int = 1
    axis: str = "time"
    padding: int = -1

    def __post_init__(self):
        for name in ("kernel_size", "stride", "dilation"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise InvalidArgumentError(f"LayerSpec.{name} must be an integer >= 1, got {value!r}")
        if self.padding < 0:
            object.__setattr__(self, "padding", (self.kernel_size - 1) * self.dilation // 2)

    @property
    def span(self) -> int:
        """Number of input positions one output position reads."""
        return (self.kernel_size - 1) * self.dilation + 1

    def output_length(self, length: int) -> int:
        return (length + 2 * self.padding - self.span) // self.stride + 1


def compute_receptive_field(specs: Sequence[LayerSpec]) -> int:
    """
    Receptive field of a layer stack, in input frames.

    RF = 1 + sum_i (k_i - 1) * d_i * J_i, where J_i is the product of the
    strides of all layers before layer i.

    Args:
        specs: Layers ordered from input to output

    Returns:
        Receptive field in frames (1 for an empty stack)
    """
    rf, jump = 1, 1
    for spec in specs:
        rf += (spec.kernel_size - 1) * spec.dilation * jump
        jump *= spec.stride
    return rf


def total_stride(specs: Sequence[LayerSpec]) -> int:
    return math.prod(spec.stride for spec in specs)


def affected_outputs(specs: Sequence[LayerSpec], start: int, stop: int, length: int) -> Tuple[int, int, int]:
    """
    Output positions that can depend on input positions [start, stop].

    The interval is propagated layer by layer using each layer's padding, so
    the result accounts for sequence boundaries.

    Returns:
        (first, last, output_length); first > last when nothing is reached
    """
    lo, hi = start, stop
    for spec in specs:
        out_len = spec.output_length(length)
        reach = spec.span - 1
        lo = max(0, -(-(lo + spec.padding - reach) // spec.stride))
        hi = min(out_len - 1, (hi + spec.padding) // spec.stride)
        length = out_len
    return lo, hi, length


def format_receptive_field(frames: int, frame_ms: float) -> str:
    return f"{frames} frames / {frames * frame_ms:.0f} ms"
