"""Parameter containers: a minimal Module tree with named registration.

Modules register Parameters and sub-Modules by attribute assignment; names are
derived from attribute paths ("backbone.blocks.0.conv1.weight"). A module
instance reused in two places (the shared backbone, the shared projection)
contributes its parameters once.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError
from .tensor import DEFAULT_DTYPE, Parameter, Tensor
from . import ops


class Module:
    def named_parameters(self, prefix: str = "") -> list[tuple[str, Parameter]]:
        out: list[tuple[str, Parameter]] = []
        seen: set[int] = set()
        self._collect(prefix, out, seen)
        return out

    def _collect(self, prefix: str, out: list, seen: set[int]) -> None:
        for attr, value in vars(self).items():
            path = f"{prefix}.{attr}" if prefix else attr
            if isinstance(value, Parameter):
                if id(value) not in seen:
                    seen.add(id(value))
                    value.name = path
                    out.append((path, value))
            elif isinstance(value, Module):
                if id(value) not in seen:
                    seen.add(id(value))
                    value._collect(path, out, seen)
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module) and id(item) not in seen:
                        seen.add(id(item))
                        item._collect(f"{path}.{i}", out, seen)

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def count_params(self) -> int:
        return sum(p.size for p in self.parameters())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()


def uniform_fanin(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int,
                  gain: float = 1.0, dtype=DEFAULT_DTYPE) -> np.ndarray:
    """Fan-in-scaled uniform init: Var(w) = gain^2 / fan_in.

    gain sqrt(2) compensates the halving a following ReLU applies to signal
    variance; without normalisation layers in the conv stack, anything weaker
    collapses activations exponentially with depth.
    """
    bound = gain * np.sqrt(3.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator,
                 dtype=DEFAULT_DTYPE):
        self.weight = Parameter(uniform_fanin(rng, (d_out, d_in), d_in, dtype=dtype))
        self.bias = Parameter(np.zeros(d_out, dtype=dtype))

    def __call__(self, x: Tensor) -> Tensor:
        return ops.linear(x, self.weight, self.bias)

    def flops(self, positions: int) -> float:
        return 2.0 * positions * self.weight.shape[0] * self.weight.shape[1]


class Conv3d(Module):
    def __init__(self, c_in: int, c_out: int, kernel, stride, padding,
                 rng: np.random.Generator, dtype=DEFAULT_DTYPE):
        kt, kh, kw = ops._triple(kernel)
        self.stride = ops._triple(stride)
        self.padding = ops._triple(padding)
        fan_in = c_in * kt * kh * kw
        self.weight = Parameter(uniform_fanin(rng, (c_out, c_in, kt, kh, kw),
                                              fan_in, gain=np.sqrt(2.0), dtype=dtype))
        self.bias = Parameter(np.zeros(c_out, dtype=dtype))

    def __call__(self, x: Tensor) -> Tensor:
        return ops.conv3d(x, self.weight, self.bias, self.stride, self.padding)

    def out_extents(self, extents: tuple[int, int, int]) -> tuple[int, int, int]:
        k = self.weight.shape[2:]
        return tuple((n + 2 * p - kk) // s + 1
                     for n, kk, s, p in zip(extents, k, self.stride, self.padding))

    def flops(self, out_extents: tuple[int, int, int], batch: int = 1) -> float:
        c_out, c_in, kt, kh, kw = self.weight.shape
        t, h, w = out_extents
        return 2.0 * batch * c_out * t * h * w * c_in * kt * kh * kw


class LayerNorm(Module):
    def __init__(self, d: int, eps: float = 1e-5, dtype=DEFAULT_DTYPE):
        self.gamma = Parameter(np.ones(d, dtype=dtype))
        self.beta = Parameter(np.zeros(d, dtype=dtype))
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return ops.layer_norm(x, self.gamma, self.beta, self.eps)


class MultiHeadAttention(Module):
    """Projected multi-head attention; query and key/value sources may differ."""

    def __init__(self, d: int, heads: int, rng: np.random.Generator,
                 dtype=DEFAULT_DTYPE):
        if d % heads != 0:
            raise ConfigurationError(f"width {d} not divisible by {heads} heads")
        self.heads = heads
        self.q_proj = Linear(d, d, rng, dtype)
        self.k_proj = Linear(d, d, rng, dtype)
        self.v_proj = Linear(d, d, rng, dtype)
        self.out_proj = Linear(d, d, rng, dtype)

    def __call__(self, q: Tensor, k: Tensor, v: Tensor) -> Tensor:
        return ops.multi_head_attention(
            q, k, v, self.heads,
            self.q_proj.weight, self.q_proj.bias,
            self.k_proj.weight, self.k_proj.bias,
            self.v_proj.weight, self.v_proj.bias,
            self.out_proj.weight, self.out_proj.bias)

    def flops(self, nq: int, nk: int, batch: int = 1) -> float:
        d = self.q_proj.weight.shape[0]
        dk = d // self.heads
        proj = (self.q_proj.flops(batch * nq) + self.k_proj.flops(batch * nk)
                + self.v_proj.flops(batch * nk) + self.out_proj.flops(batch * nq))
        qk = 2.0 * batch * self.heads * nq * nk * dk
        av = 2.0 * batch * self.heads * nq * nk * dk
        return proj + qk + av
