"""Shared-weight multi-scale 3D-conv pyramid.

Five sequential residual blocks; features are tapped after blocks 3, 4 and 5.
Early blocks run at high spatio-temporal resolution, deeper blocks are
coarser and wider. Both person streams pass through the same instance, so
weights are shared by construction.

No batch normalisation anywhere: blocks are plain conv + ReLU with
identity-or-projection residuals, which keeps train and eval forwards
identical and the whole pipeline deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError
from ..nn import Conv3d, Module, Tensor, ops
from ..nn.tensor import DEFAULT_DTYPE


@dataclass(frozen=True)
class BackboneConfig:
    """Widths and strides of the 5-block pyramid plus the expected clip extents.

    Defaults are the desk-scale preset: 16 frames of 32x32 RGB, widths
    (8, 16, 24, 32, 48), spatial halving in blocks 1/2/4 and temporal halving
    in blocks 2/3/4, which lands the taps at g3=(24,4,8,8), g4=(32,2,4,4),
    g5=(48,2,4,4).
    """

    channels: tuple[int, ...] = (8, 16, 24, 32, 48)
    temporal_strides: tuple[int, ...] = (1, 2, 2, 2, 1)
    spatial_strides: tuple[int, ...] = (2, 2, 1, 2, 1)
    kernel: int = 3
    in_channels: int = 3
    frames: int = 16
    height: int = 32
    width: int = 32

    def __post_init__(self):
        for name, v in (("channels", self.channels),
                        ("temporal_strides", self.temporal_strides),
                        ("spatial_strides", self.spatial_strides)):
            if len(v) != 5:
                raise ConfigurationError(f"{name} must have 5 entries, got {len(v)}")
            if any(int(x) < 1 for x in v):
                raise ConfigurationError(f"{name} entries must be positive, got {v}")
        if any(a > b for a, b in zip(self.channels[2:], self.channels[3:])):
            raise ConfigurationError(
                f"tapped channel widths must be non-decreasing, got {self.channels[2:]}"
            )
        for i, (t, h, w) in enumerate(self.block_extents()):
            if min(t, h, w) < 1:
                raise ConfigurationError(
                    f"block {i + 1} output extent {(t, h, w)} collapses below 1; "
                    f"reduce strides or enlarge the input"
                )

    def block_extents(self) -> list[tuple[int, int, int]]:
        """Output (t, h, w) after each block, for kernel k with padding k//2."""
        k, p = self.kernel, self.kernel // 2
        t, h, w = self.frames, self.height, self.width
        out = []
        for ts, ss in zip(self.temporal_strides, self.spatial_strides):
            t = (t + 2 * p - k) // ts + 1
            h = (h + 2 * p - k) // ss + 1
            w = (w + 2 * p - k) // ss + 1
            out.append((t, h, w))
        return out


@dataclass
class BlockFeatures:
    """Per-stream pyramid tapped after blocks 3, 4, 5."""

    g3: Tensor
    g4: Tensor
    g5: Tensor

    def get(self, block_index: int) -> Tensor:
        try:
            return {3: self.g3, 4: self.g4, 5: self.g5}[block_index]
        except KeyError:
            raise ConfigurationError(
                f"no tapped feature for block {block_index}; taps are 3, 4, 5"
            ) from None


class ResidualBlock(Module):
    def __init__(self, c_in: int, c_out: int, kernel: int, t_stride: int,
                 s_stride: int, rng: np.random.Generator, dtype=DEFAULT_DTYPE):
        stride = (t_stride, s_stride, s_stride)
        pad = kernel // 2
        self.conv1 = Conv3d(c_in, c_out, kernel, stride, pad, rng, dtype)
        self.conv2 = Conv3d(c_out, c_out, kernel, 1, pad, rng, dtype)
        if c_in != c_out or stride != (1, 1, 1):
            self.shortcut = Conv3d(c_in, c_out, 1, stride, 0, rng, dtype)
        else:
            self.shortcut = None

    def __call__(self, x: Tensor) -> Tensor:
        y = self.conv2(ops.relu(self.conv1(x)))
        s = self.shortcut(x) if self.shortcut is not None else x
        return ops.relu(ops.add(y, s))


class Backbone(Module):
    def __init__(self, config: BackboneConfig, rng: np.random.Generator,
                 dtype=DEFAULT_DTYPE):
        self.config = config
        blocks = []
        c_prev = config.in_channels
        for c, ts, ss in zip(config.channels, config.temporal_strides,
                             config.spatial_strides):
            blocks.append(ResidualBlock(c_prev, c, config.kernel, ts, ss, rng, dtype))
            c_prev = c
        self.blocks = blocks

    def __call__(self, clip: Tensor) -> BlockFeatures:
        cfg = self.config
        expected = (cfg.in_channels, cfg.frames, cfg.height, cfg.width)
        if clip.ndim != 5 or clip.shape[1:] != expected:
            raise ConfigurationError(
                f"clip extents {tuple(clip.shape)} do not match backbone config "
                f"(batch, {expected[0]}, {expected[1]}, {expected[2]}, {expected[3]})"
            )
        x = clip
        taps: dict[int, Tensor] = {}
        for i, block in enumerate(self.blocks):
            x = block(x)
            if i >= 2:
                taps[i + 1] = x
        return BlockFeatures(g3=taps[3], g4=taps[4], g5=taps[5])

    def dual_forward(self, leader: Tensor, assistant: Tensor
                     ) -> tuple[BlockFeatures, BlockFeatures]:
        """Apply the same parameters to both streams."""
        return self(leader), self(assistant)

    def flops(self, batch: int = 1) -> float:
        total = 0.0
        extents = self.config.block_extents()
        for i, block in enumerate(self.blocks):
            out = extents[i]
            total += block.conv1.flops(out, batch)
            total += block.conv2.flops(out, batch)
            if block.shortcut is not None:
                total += block.shortcut.flops(out, batch)
        return total
