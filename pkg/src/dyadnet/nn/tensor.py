"""Reverse-mode autodiff core: a Tensor wrapping a numpy array plus a tape.

The op set is small and closed (see ops.py), so every op records its parents
and a backward closure directly on the output tensor; backward() runs a
topological sweep over that implicit tape. Values are float32 by default;
float64 is used for finite-difference gradient checking.

Tensors are treated as immutable once produced by an op. Parameters are the
only leaves that get mutated, and only by the optimiser between steps.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable

import numpy as np

from ..errors import ContractViolation, NumericsError

DEFAULT_DTYPE = np.float32

# When True, every op output is validated to be finite. Off by default:
# it adds a full pass over the data per op. The training loop checks the
# loss every step regardless, and tests/gradcheck switch this on.
_finite_check = False

# When False, ops do not record parents/backward closures (evaluation mode).
_grad_enabled = True


def set_finite_check(enabled: bool) -> None:
    global _finite_check
    _finite_check = bool(enabled)


def finite_check_enabled() -> bool:
    return _finite_check


def grad_enabled() -> bool:
    return _grad_enabled


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (forward-only evaluation)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """Dense n-dimensional float array with an optional autodiff tape entry.

    data is row-major contiguous; shape/dtype come from the underlying array.
    Produced tensors are never written to in place.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")

    def __init__(
        self,
        data: np.ndarray,
        requires_grad: bool = False,
        parents: tuple["Tensor", ...] = (),
        backward: Callable[[np.ndarray], None] | None = None,
        op: str = "",
    ):
        if not isinstance(data, np.ndarray):
            data = np.asarray(data, dtype=DEFAULT_DTYPE)
        if data.dtype not in (np.float32, np.float64):
            data = data.astype(DEFAULT_DTYPE)
        self.data = np.ascontiguousarray(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = parents if _grad_enabled else ()
        self._backward = backward if _grad_enabled else None
        self.op = op
        if _finite_check and not np.all(np.isfinite(self.data)):
            raise NumericsError(f"non-finite values produced by op '{op or 'leaf'}'")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad[...] = 0.0

    def backward(self, seed: np.ndarray | None = None) -> None:
        """Reverse sweep from this tensor, accumulating into .grad of leaves.

        Non-scalar roots require an explicit seed gradient.
        """
        if seed is None:
            if self.data.size != 1:
                raise ContractViolation(
                    f"backward() without seed requires a scalar, got shape {self.shape}"
                )
            seed = np.ones_like(self.data)
        else:
            seed = np.asarray(seed, dtype=self.data.dtype)
            if seed.shape != self.data.shape:
                raise ContractViolation(
                    f"seed shape {seed.shape} != tensor shape {self.shape}"
                )

        order = _toposort(self)
        self.accumulate_grad(seed)
        for node in order:
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
            # Intermediate grads are not needed once propagated; free them
            # so big conv activations do not pile up. Leaves keep theirs.
            if node._backward is not None and node is not self:
                node.grad = None
        if self._backward is not None:
            self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}, op={self.op!r})"


class Parameter(Tensor):
    """Trainable leaf tensor with a path-like name and zero-initialised grad."""

    __slots__ = ("name",)

    def __init__(self, data: np.ndarray, name: str = ""):
        super().__init__(data, requires_grad=True)
        self.name = name
        self.grad = np.zeros_like(self.data)


def _toposort(root: Tensor) -> list[Tensor]:
    """Reverse topological order (root first), iterative to spare the stack."""
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))
    order.reverse()
    return order


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    arr = np.asarray(x, dtype=dtype or DEFAULT_DTYPE)
    return Tensor(arr)


def collect_parameters(tensors: Iterable[Tensor]) -> list[Parameter]:
    """All distinct Parameters reachable from the given tensors."""
    seen: set[int] = set()
    out: list[Parameter] = []
    stack = list(tensors)
    while stack:
        t = stack.pop()
        if id(t) in seen:
            continue
        seen.add(id(t))
        if isinstance(t, Parameter):
            out.append(t)
        stack.extend(t._parents)
    return out
