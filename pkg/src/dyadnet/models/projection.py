"""Token projection: pooled block features -> per-stream token sequences.

Abstract mode pools each tapped block globally over (t, h, w), applies GELU
then a per-block linear map to width d, and assembles [clf, L3, L4, L5] with
a learnable positional encoding and layer norm. Temporal mode pools block-5
spatially only, keeping one token per surviving frame, then assembles
[clf, frame_0 .. frame_{t-1}] the same way.

One projector instance serves both streams: the block/frame projections, the
positional encoding, and the norm are shared; only the class tokens are
per-stream parameters (owned by the model, passed in per call).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, ContractViolation
from ..nn import LayerNorm, Linear, Module, Parameter, Tensor, ops
from ..nn.tensor import DEFAULT_DTYPE
from .backbone import BackboneConfig, BlockFeatures

ABSTRACT = "abstract"
TEMPORAL = "temporal"


@dataclass(frozen=True)
class ProjectionConfig:
    mode: str = ABSTRACT
    d: int = 96
    blocks: tuple[int, ...] = (3, 4, 5)

    def __post_init__(self):
        if self.mode not in (ABSTRACT, TEMPORAL):
            raise ConfigurationError(f"unknown projection mode {self.mode!r}")
        if self.d < 1:
            raise ConfigurationError(f"embedding width must be positive, got {self.d}")
        if self.mode == ABSTRACT:
            if not self.blocks or any(b not in (3, 4, 5) for b in self.blocks):
                raise ConfigurationError(
                    f"tapped blocks must be a non-empty subset of (3, 4, 5), got {self.blocks}"
                )
            if len(set(self.blocks)) != len(self.blocks):
                raise ConfigurationError(f"duplicate tapped block in {self.blocks}")


@dataclass
class TokenSequence:
    """Projected embedding per stream: tokens [b, L, d] plus position meanings."""

    tokens: Tensor
    layout: tuple[str, ...]

    def __post_init__(self):
        if self.tokens.ndim != 3 or self.tokens.shape[1] != len(self.layout):
            raise ContractViolation(
                f"token tensor {self.tokens.shape} does not match layout of "
                f"{len(self.layout)} positions"
            )


class StreamProjector(Module):
    """Shared projection module applied separately to each stream."""

    def __init__(self, config: ProjectionConfig, backbone_config: BackboneConfig,
                 rng: np.random.Generator, dtype=DEFAULT_DTYPE):
        self.config = config
        d = config.d
        extents = backbone_config.block_extents()
        if config.mode == ABSTRACT:
            self.block_proj = [
                Linear(backbone_config.channels[b - 1], d, rng, dtype)
                for b in config.blocks
            ]
            self.seq_len = len(config.blocks) + 1
            self._layout = ("clf",) + tuple(f"block{b}" for b in config.blocks)
        else:
            self.frame_proj = Linear(backbone_config.channels[4], d, rng, dtype)
            t5 = extents[4][0]
            self.seq_len = t5 + 1
            self._layout = ("clf",) + tuple(f"frame{i}" for i in range(t5))
        self.pos = Parameter((rng.standard_normal((1, self.seq_len, d)) * 0.02
                              ).astype(dtype))
        self.norm = LayerNorm(d, dtype=dtype)

    # --- abstract mode -----------------------------------------------------

    def abstract_project(self, features: BlockFeatures) -> list[Tensor]:
        """Per tapped block: global pool -> GELU -> linear to d. Returns [b, d] each."""
        if self.config.mode != ABSTRACT:
            raise ConfigurationError("abstract_project called on a temporal projector")
        out = []
        for b, proj in zip(self.config.blocks, self.block_proj):
            g = features.get(b)
            if g.shape[1] != proj.weight.shape[1]:
                raise ConfigurationError(
                    f"block{b} has {g.shape[1]} channels but its projection "
                    f"expects {proj.weight.shape[1]}"
                )
            out.append(proj(ops.gelu(ops.avg_pool3d_global(g))))
        return out

    def assemble_tokens(self, layer_tokens: list[Tensor], clf: Parameter) -> TokenSequence:
        """Stack [clf, L...] along the token axis, add PE, layer-normalise."""
        batch = layer_tokens[0].shape[0]
        d = self.config.d
        rows = [ops.tile_batch(clf, batch)]
        rows += [ops.reshape(t, (batch, 1, d)) for t in layer_tokens]
        seq = ops.concat(rows, axis=1)
        if seq.shape[1] != self.seq_len:
            raise ContractViolation(
                f"assembled {seq.shape[1]} tokens, expected {self.seq_len}"
            )
        return TokenSequence(self.norm(ops.add(seq, self.pos)), self._layout)

    # --- temporal mode -----------------------------------------------------

    def temporal_project(self, g5: Tensor, clf: Parameter) -> TokenSequence:
        """Spatial pool per frame -> ReLU -> linear, one token per frame + clf."""
        if self.config.mode != TEMPORAL:
            raise ConfigurationError("temporal_project called on an abstract projector")
        if g5.shape[1] != self.frame_proj.weight.shape[1]:
            raise ConfigurationError(
                f"block5 has {g5.shape[1]} channels but the frame projection "
                f"expects {self.frame_proj.weight.shape[1]}"
            )
        pooled = ops.avg_pool2d_spatial(g5)                  # [b, c, t]
        frames = ops.transpose(pooled, (0, 2, 1))            # [b, t, c]
        tokens = self.frame_proj(ops.relu(frames))           # [b, t, d]
        batch = tokens.shape[0]
        seq = ops.concat([ops.tile_batch(clf, batch), tokens], axis=1)
        if seq.shape[1] != self.seq_len:
            raise ContractViolation(
                f"assembled {seq.shape[1]} tokens, expected {self.seq_len} "
                f"(clip frames surviving the backbone changed?)"
            )
        return TokenSequence(self.norm(ops.add(seq, self.pos)), self._layout)

    # --- common ------------------------------------------------------------

    def __call__(self, features: BlockFeatures, clf: Parameter) -> TokenSequence:
        if self.config.mode == ABSTRACT:
            return self.assemble_tokens(self.abstract_project(features), clf)
        return self.temporal_project(features.g5, clf)

    def flops(self, batch: int = 1) -> float:
        if self.config.mode == ABSTRACT:
            return sum(p.flops(batch) for p in self.block_proj)
        return self.frame_proj.flops(batch * (self.seq_len - 1))
