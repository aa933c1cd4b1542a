"""Cross-stream token fusion and the classification head.

One fusion block refines the query-side sequence against the other stream:

    Q  = [LNorm(G_q + MHSA(G_q)) ; clf of the other stream]   (first block only)
    K = V = kv_proj(G_kv)
    x  = LNorm(Q + MHA(Q, K, V))
    out = LNorm(x + MLP(x))

In cross mode the key/value source is the other stream; the self-attention
ablation builds K, V from the query stream instead, so the other stream's
layer tokens never enter the fusion. With more than one block, the refined
sequence feeds the next block's query side (no second clf is appended).

The head reads only the two class-token rows of the refined sequence,
concatenates them and applies one linear map to class scores.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, ContractViolation
from ..nn import LayerNorm, Linear, Module, MultiHeadAttention, Tensor, ops
from ..nn.tensor import DEFAULT_DTYPE
from .projection import TokenSequence

CROSS = "cross"
SELF_ABLATION = "self"


@dataclass(frozen=True)
class GlaConfig:
    heads: int = 8
    modules: int = 1
    attention: str = CROSS
    d: int = 96
    mlp_ratio: int = 2

    def __post_init__(self):
        if self.attention not in (CROSS, SELF_ABLATION):
            raise ConfigurationError(f"unknown attention mode {self.attention!r}")
        if self.modules < 1:
            raise ConfigurationError(f"need at least one fusion module, got {self.modules}")
        if self.heads < 1 or self.d % self.heads != 0:
            raise ConfigurationError(
                f"width {self.d} must be divisible by heads {self.heads}"
            )


@dataclass
class RefinedTokens:
    """Fused sequence [b, n+2, d]; layout names each row's meaning."""

    tokens: Tensor
    layout: tuple[str, ...]

    def __post_init__(self):
        if self.tokens.ndim != 3 or self.tokens.shape[1] != len(self.layout):
            raise ContractViolation(
                f"refined tensor {self.tokens.shape} does not match layout of "
                f"{len(self.layout)} positions"
            )


class GlaBlock(Module):
    def __init__(self, d: int, heads: int, mlp_ratio: int,
                 rng: np.random.Generator, dtype=DEFAULT_DTYPE):
        self.self_attn = MultiHeadAttention(d, heads, rng, dtype)
        self.norm_q = LayerNorm(d, dtype=dtype)
        self.kv_proj = Linear(d, d, rng, dtype)
        self.cross_attn = MultiHeadAttention(d, heads, rng, dtype)
        self.norm_attn = LayerNorm(d, dtype=dtype)
        self.mlp_in = Linear(d, mlp_ratio * d, rng, dtype)
        self.mlp_out = Linear(mlp_ratio * d, d, rng, dtype)
        self.norm_mlp = LayerNorm(d, dtype=dtype)

    def build_query(self, g_query: Tensor, clf_other: Tensor | None) -> Tensor:
        """Self-attention with residual and norm; optionally append the other
        stream's clf token as an extra query row."""
        q = self.norm_q(ops.add(g_query, self.self_attn(g_query, g_query, g_query)))
        if clf_other is not None:
            if clf_other.ndim != 3 or clf_other.shape[1] != 1:
                raise ContractViolation(
                    f"clf token must be [b, 1, d], got {clf_other.shape}"
                )
            q = ops.concat([q, clf_other], axis=1)
        return q

    def build_key_value(self, g_kv: Tensor) -> tuple[Tensor, Tensor]:
        """Single linear map; key and value are the same tensor."""
        kv = self.kv_proj(g_kv)
        return kv, kv

    def cross_attend(self, q: Tensor, k: Tensor, v: Tensor) -> Tensor:
        x = self.norm_attn(ops.add(q, self.cross_attn(q, k, v)))
        return self.norm_mlp(ops.add(x, self.mlp_out(ops.gelu(self.mlp_in(x)))))

    def __call__(self, g_query: Tensor, g_kv: Tensor,
                 clf_other: Tensor | None) -> Tensor:
        q = self.build_query(g_query, clf_other)
        k, v = self.build_key_value(g_kv)
        return self.cross_attend(q, k, v)

    def flops(self, nq_in: int, nq_out: int, nk: int, batch: int = 1) -> float:
        d = self.kv_proj.weight.shape[0]
        total = self.self_attn.flops(nq_in, nq_in, batch)
        total += self.kv_proj.flops(batch * nk)
        total += self.cross_attn.flops(nq_out, nk, batch)
        total += self.mlp_in.flops(batch * nq_out) + self.mlp_out.flops(batch * nq_out)
        return total


class GlaFusion(Module):
    def __init__(self, config: GlaConfig, rng: np.random.Generator,
                 dtype=DEFAULT_DTYPE):
        self.config = config
        self.blocks = [GlaBlock(config.d, config.heads, config.mlp_ratio, rng, dtype)
                       for _ in range(config.modules)]

    def __call__(self, g_leader: TokenSequence, g_assistant: TokenSequence
                 ) -> RefinedTokens:
        if g_leader.tokens.shape[-1] != self.config.d:
            raise ConfigurationError(
                f"token width {g_leader.tokens.shape[-1]} != fusion width {self.config.d}"
            )
        if g_leader.layout[0] != "clf" or g_assistant.layout[0] != "clf":
            raise ContractViolation("token sequences must carry clf at position 0")
        kv_seq = g_assistant if self.config.attention == CROSS else g_leader
        clf_assistant = ops.narrow(g_assistant.tokens, 1, 0, 1)
        x = g_leader.tokens
        for i, block in enumerate(self.blocks):
            x = block(x, kv_seq.tokens, clf_assistant if i == 0 else None)
        # Canonical layout for the head: both clf rows first, then the
        # refined layer/frame positions.
        n_rows = x.shape[1]
        leader_clf = ops.narrow(x, 1, 0, 1)
        assistant_clf = ops.narrow(x, 1, n_rows - 1, 1)
        body = ops.narrow(x, 1, 1, n_rows - 2)
        tokens = ops.concat([leader_clf, assistant_clf, body], axis=1)
        layout = ("clf_leader", "clf_assistant") + g_leader.layout[1:]
        return RefinedTokens(tokens, layout)

    def flops(self, n_tokens: int, batch: int = 1) -> float:
        total = 0.0
        nq = n_tokens
        for i, block in enumerate(self.blocks):
            nq_out = nq + 1 if i == 0 else nq
            total += block.flops(nq, nq_out, n_tokens, batch)
            nq = nq_out
        return total


class ClassificationHead(Module):
    """One linear layer over the concatenated pair of class-token embeddings."""

    def __init__(self, d: int, num_classes: int, rng: np.random.Generator,
                 dtype=DEFAULT_DTYPE):
        if num_classes < 2:
            raise ConfigurationError(f"need at least 2 classes, got {num_classes}")
        self.fc = Linear(2 * d, num_classes, rng, dtype)

    def __call__(self, refined: RefinedTokens) -> Tensor:
        if refined.layout[:2] != ("clf_leader", "clf_assistant"):
            raise ContractViolation(
                f"head expects clf rows at positions 0 and 1, got layout {refined.layout[:2]}"
            )
        b, _, d = refined.tokens.shape
        pair = ops.narrow(refined.tokens, 1, 0, 2)
        return self.fc(ops.reshape(pair, (b, 2 * d)))

    def flops(self, batch: int = 1) -> float:
        return self.fc.flops(batch)
