"""Tensor math, random sources, SGD, and gradient verification."""

from .gradcheck import finite_diff_check, grad
from .optim import CosineSchedule, sgd_step
from .random import gaussian_init, philox_generator
from .tensor import (
    Tensor,
    concat,
    is_grad_enabled,
    l2_normalize,
    logsumexp,
    no_grad,
    sigmoid,
    softmax,
    softplus,
    stack,
)

__all__ = [
    "Tensor",
    "no_grad",
    "is_grad_enabled",
    "concat",
    "stack",
    "softmax",
    "logsumexp",
    "softplus",
    "sigmoid",
    "l2_normalize",
    "philox_generator",
    "gaussian_init",
    "CosineSchedule",
    "sgd_step",
    "grad",
    "finite_diff_check",
]
