"""Model zoo: the dual-path fusion model and its ablation baselines.

Every model exposes the same three entry points so the harness stays
model-agnostic:

    training_loss(leader, assistant, labels) -> (scalar loss Tensor, scores)
    predict_scores(leader, assistant)        -> class probabilities [b, k]
    flops(batch)                             -> analytic multiply-add count

Baselines:
  * single_leader / single_assistant: one stream, clf token read directly.
  * late_fusion: two fully independent single-stream pipelines; their losses
    are disjoint sums (identical updates to training them separately), and
    prediction averages the two streams' softmax scores.
  * pooled_concat: shared backbone, raw pooled block features of both streams
    concatenated into one linear head (no token projection, no fusion).
  * token_concat: shared backbone + token projection, the two clf tokens
    concatenated into one linear head (no fusion).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, ContractViolation
from ..nn import Linear, Module, Parameter, Tensor, ops
from ..nn.tensor import DEFAULT_DTYPE
from .backbone import Backbone, BackboneConfig
from .gla import ClassificationHead, GlaConfig, GlaFusion
from .projection import ABSTRACT, ProjectionConfig, StreamProjector

MODEL_NAMES = ("gla", "late_fusion", "single_leader", "single_assistant",
               "pooled_concat", "token_concat")


@dataclass(frozen=True)
class ArchConfig:
    model: str = "gla"
    classes: int = 6
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    projection: ProjectionConfig = field(default_factory=ProjectionConfig)
    gla: GlaConfig = field(default_factory=GlaConfig)

    def __post_init__(self):
        if self.model not in MODEL_NAMES:
            raise ConfigurationError(
                f"unknown model {self.model!r}; choose one of {MODEL_NAMES}"
            )
        if self.classes < 2:
            raise ConfigurationError(f"need at least 2 classes, got {self.classes}")
        if self.gla.d != self.projection.d:
            raise ConfigurationError(
                f"fusion width {self.gla.d} != projection width {self.projection.d}"
            )


def _softmax_np(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _clf_param(rng: np.random.Generator, d: int, dtype) -> Parameter:
    return Parameter((rng.standard_normal((1, 1, d)) * 0.02).astype(dtype))


class DualPathModel(Module):
    """Shared backbone -> shared projector -> cross-stream fusion -> head."""

    def __init__(self, arch: ArchConfig, rng: np.random.Generator,
                 dtype=DEFAULT_DTYPE):
        self.arch = arch
        d = arch.projection.d
        self.backbone = Backbone(arch.backbone, rng, dtype)
        self.projector = StreamProjector(arch.projection, arch.backbone, rng, dtype)
        self.clf_leader = _clf_param(rng, d, dtype)
        self.clf_assistant = _clf_param(rng, d, dtype)
        self.fusion = GlaFusion(arch.gla, rng, dtype)
        self.head = ClassificationHead(d, arch.classes, rng, dtype)

    def forward(self, leader: Tensor, assistant: Tensor) -> Tensor:
        feats_l, feats_a = self.backbone.dual_forward(leader, assistant)
        g_leader = self.projector(feats_l, self.clf_leader)
        g_assistant = self.projector(feats_a, self.clf_assistant)
        return self.head(self.fusion(g_leader, g_assistant))

    def training_loss(self, leader, assistant, labels):
        logits = self.forward(leader, assistant)
        return ops.cross_entropy(logits, labels), _softmax_np(logits.data)

    def predict_scores(self, leader, assistant) -> np.ndarray:
        return _softmax_np(self.forward(leader, assistant).data)

    def flops(self, batch: int = 1) -> float:
        total = 2.0 * self.backbone.flops(batch)
        total += 2.0 * self.projector.flops(batch)
        total += self.fusion.flops(self.projector.seq_len, batch)
        total += self.head.flops(batch)
        return total


class SingleStreamModel(Module):
    """One stream only: backbone -> projection -> clf token -> linear head.

    The clf token only carries input information after token mixing, so the
    readout applies the same single self-attention step the full model runs
    per stream (norm(G + MHSA(G))) before reading the clf row. Without it the
    clf row is a constant and the head is input-independent.
    """

    def __init__(self, arch: ArchConfig, stream: str, rng: np.random.Generator,
                 dtype=DEFAULT_DTYPE):
        if stream not in ("leader", "assistant"):
            raise ConfigurationError(f"stream must be leader or assistant, got {stream!r}")
        self.arch = arch
        self.stream = stream
        d = arch.projection.d
        self.backbone = Backbone(arch.backbone, rng, dtype)
        self.projector = StreamProjector(arch.projection, arch.backbone, rng, dtype)
        self.clf = _clf_param(rng, d, dtype)
        self.mixer = MultiHeadAttention(d, arch.gla.heads, rng, dtype)
        self.mixer_norm = LayerNorm(d, dtype=dtype)
        self.fc = Linear(d, arch.classes, rng, dtype)

    def forward_clip(self, clip: Tensor) -> Tensor:
        seq = self.projector(self.backbone(clip), self.clf)
        g = seq.tokens
        mixed = self.mixer_norm(ops.add(g, self.mixer(g, g, g)))
        b, _, d = mixed.shape
        clf_row = ops.reshape(ops.narrow(mixed, 1, 0, 1), (b, d))
        return self.fc(clf_row)

    def forward(self, leader: Tensor, assistant: Tensor) -> Tensor:
        return self.forward_clip(leader if self.stream == "leader" else assistant)

    def training_loss(self, leader, assistant, labels):
        logits = self.forward(leader, assistant)
        return ops.cross_entropy(logits, labels), _softmax_np(logits.data)

    def predict_scores(self, leader, assistant) -> np.ndarray:
        return _softmax_np(self.forward(leader, assistant).data)

    def flops(self, batch: int = 1) -> float:
        n = self.projector.seq_len
        return (self.backbone.flops(batch) + self.projector.flops(batch)
                + self.mixer.flops(n, n, batch) + self.fc.flops(batch))


class LateFusionModel(Module):
    """Two independent single-stream pipelines, fused only at the score level."""

    def __init__(self, arch: ArchConfig, rng: np.random.Generator,
                 dtype=DEFAULT_DTYPE):
        self.arch = arch
        self.leader_model = SingleStreamModel(arch, "leader", rng, dtype)
        self.assistant_model = SingleStreamModel(arch, "assistant", rng, dtype)

    def training_loss(self, leader, assistant, labels):
        # Disjoint parameter sets + additive losses == training each stream
        # independently on the same batch order.
        logits_l = self.leader_model.forward_clip(leader)
        logits_a = self.assistant_model.forward_clip(assistant)
        loss = ops.add(ops.cross_entropy(logits_l, labels),
                       ops.cross_entropy(logits_a, labels))
        scores = 0.5 * (_softmax_np(logits_l.data) + _softmax_np(logits_a.data))
        return loss, scores

    def predict_scores(self, leader, assistant) -> np.ndarray:
        sl = self.leader_model.predict_scores(leader, assistant)
        sa = self.assistant_model.predict_scores(leader, assistant)
        return 0.5 * (sl + sa)

    def flops(self, batch: int = 1) -> float:
        return self.leader_model.flops(batch) + self.assistant_model.flops(batch)


class PooledConcatModel(Module):
    """No token projection, no fusion: pooled block features of both streams
    concatenated into one linear classifier (shared backbone)."""

    def __init__(self, arch: ArchConfig, rng: np.random.Generator,
                 dtype=DEFAULT_DTYPE):
        self.arch = arch
        self.backbone = Backbone(arch.backbone, rng, dtype)
        width = 2 * sum(arch.backbone.channels[2:])
        self.fc = Linear(width, arch.classes, rng, dtype)

    def forward(self, leader: Tensor, assistant: Tensor) -> Tensor:
        pooled = []
        for feats in self.backbone.dual_forward(leader, assistant):
            for g in (feats.g3, feats.g4, feats.g5):
                pooled.append(ops.avg_pool3d_global(g))
        return self.fc(ops.concat(pooled, axis=1))

    def training_loss(self, leader, assistant, labels):
        logits = self.forward(leader, assistant)
        return ops.cross_entropy(logits, labels), _softmax_np(logits.data)

    def predict_scores(self, leader, assistant) -> np.ndarray:
        return _softmax_np(self.forward(leader, assistant).data)

    def flops(self, batch: int = 1) -> float:
        return 2.0 * self.backbone.flops(batch) + self.fc.flops(batch)


class TokenConcatModel(Module):
    """Token projection but no fusion: the two clf tokens feed one linear head."""

    def __init__(self, arch: ArchConfig, rng: np.random.Generator,
                 dtype=DEFAULT_DTYPE):
        if arch.projection.mode != ABSTRACT:
            raise ConfigurationError("token_concat baseline uses abstract projection")
        self.arch = arch
        d = arch.projection.d
        self.backbone = Backbone(arch.backbone, rng, dtype)
        self.projector = StreamProjector(arch.projection, arch.backbone, rng, dtype)
        self.clf_leader = _clf_param(rng, d, dtype)
        self.clf_assistant = _clf_param(rng, d, dtype)
        self.fc = Linear(2 * d, arch.classes, rng, dtype)

    def forward(self, leader: Tensor, assistant: Tensor) -> Tensor:
        feats_l, feats_a = self.backbone.dual_forward(leader, assistant)
        g_l = self.projector(feats_l, self.clf_leader)
        g_a = self.projector(feats_a, self.clf_assistant)
        b, _, d = g_l.tokens.shape
        rows = ops.concat([ops.narrow(g_l.tokens, 1, 0, 1),
                           ops.narrow(g_a.tokens, 1, 0, 1)], axis=1)
        return self.fc(ops.reshape(rows, (b, 2 * d)))

    def training_loss(self, leader, assistant, labels):
        logits = self.forward(leader, assistant)
        return ops.cross_entropy(logits, labels), _softmax_np(logits.data)

    def predict_scores(self, leader, assistant) -> np.ndarray:
        return _softmax_np(self.forward(leader, assistant).data)

    def flops(self, batch: int = 1) -> float:
        return (2.0 * self.backbone.flops(batch)
                + 2.0 * self.projector.flops(batch) + self.fc.flops(batch))


def build_model(arch: ArchConfig, seed: int, dtype=DEFAULT_DTYPE) -> Module:
    """Construct the configured model with deterministic seeded init."""
    rng = np.random.default_rng(seed)
    if arch.model == "gla":
        return DualPathModel(arch, rng, dtype)
    if arch.model == "late_fusion":
        return LateFusionModel(arch, rng, dtype)
    if arch.model == "single_leader":
        return SingleStreamModel(arch, "leader", rng, dtype)
    if arch.model == "single_assistant":
        return SingleStreamModel(arch, "assistant", rng, dtype)
    if arch.model == "pooled_concat":
        return PooledConcatModel(arch, rng, dtype)
    if arch.model == "token_concat":
        return TokenConcatModel(arch, rng, dtype)
    raise ConfigurationError(f"unknown model {arch.model!r}")
