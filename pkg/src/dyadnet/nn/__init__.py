from .tensor import (
    DEFAULT_DTYPE,
    Parameter,
    Tensor,
    as_tensor,
    collect_parameters,
    finite_check_enabled,
    grad_enabled,
    no_grad,
    set_finite_check,
)
from . import ops
from .module import Conv3d, LayerNorm, Linear, Module, MultiHeadAttention, uniform_fanin
from .optim import SGD
from .gradcheck import GradCheckResult, check_directional, check_elementwise

__all__ = [
    "DEFAULT_DTYPE", "Parameter", "Tensor", "as_tensor", "collect_parameters",
    "finite_check_enabled", "grad_enabled", "no_grad", "set_finite_check",
    "ops", "Conv3d", "LayerNorm", "Linear", "Module", "MultiHeadAttention",
    "uniform_fanin", "SGD", "GradCheckResult", "check_directional", "check_elementwise",
]
