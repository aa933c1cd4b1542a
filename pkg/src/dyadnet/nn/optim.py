"""SGD with classical momentum.

Update per parameter: v <- mu*v + g ; p <- p - lr*v. Gradients are zeroed by
an explicit zero_grad() call, never implicitly by step().
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractViolation
from .tensor import Parameter


class SGD:
    def __init__(self, named_params: list[tuple[str, Parameter]],
                 lr: float, momentum: float = 0.0):
        if lr <= 0:
            raise ContractViolation(f"learning rate must be positive, got {lr}")
        if not 0.0 <= momentum < 1.0:
            raise ContractViolation(f"momentum must lie in [0, 1), got {momentum}")
        self.lr = float(lr)
        self.momentum = float(momentum)
        self._params = list(named_params)
        self.buffers: dict[str, np.ndarray] = {
            name: np.zeros_like(p.data) for name, p in self._params
        }

    def step(self) -> None:
        for name, p in self._params:
            g = p.grad
            if g is None:
                raise ContractViolation(f"parameter '{name}' has no gradient")
            buf = self.buffers[name]
            if g.shape != p.data.shape or buf.shape != p.data.shape:
                raise ContractViolation(
                    f"shape drift on '{name}': value {p.data.shape}, "
                    f"grad {g.shape}, buffer {buf.shape}"
                )
            buf *= self.momentum
            buf += g
            p.data -= self.lr * buf

    def zero_grad(self) -> None:
        for _, p in self._params:
            p.zero_grad()
