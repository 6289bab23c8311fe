"""Plain SGD and the cosine-annealed learning-rate schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError, ShapeError
from .tensor import Tensor

__all__ = ["CosineSchedule", "sgd_step"]


@dataclass(frozen=True)
class CosineSchedule:
    """lr(e) = base_lr * 0.5 * (1 + cos(pi * e / total_epochs)).

    Endpoints: lr(0) == base_lr and lr(total_epochs) == 0.
    """

    base_lr: float
    total_epochs: int

    def __post_init__(self):
        if self.base_lr < 0:
            raise ParameterError(f"base_lr must be non-negative, got {self.base_lr}")
        if self.total_epochs <= 0:
            raise ParameterError(
                f"total_epochs must be positive, got {self.total_epochs}"
            )

    def lr(self, epoch: int) -> float:
        if epoch < 0 or epoch > self.total_epochs:
            raise ParameterError(
                f"epoch {epoch} outside [0, {self.total_epochs}]"
            )
        return self.base_lr * 0.5 * (1.0 + math.cos(math.pi * epoch / self.total_epochs))


def sgd_step(
    params: list[Tensor], grads: list[np.ndarray], lr: float
) -> list[Tensor]:
    """theta' = theta - lr * g, returned as fresh trainable leaves.

    Existing tensors are left untouched; callers rebind their parameter
    references to the returned list.
    """
    if len(params) != len(grads):
        raise ShapeError(
            f"{len(params)} params but {len(grads)} grads"
        )
    out: list[Tensor] = []
    for p, g in zip(params, grads):
        g = np.asarray(g, dtype=np.float64)
        if g.shape != p.data.shape:
            raise ShapeError(
                f"grad shape {g.shape} does not match param shape {p.data.shape}"
            )
        out.append(Tensor(p.data - lr * g, requires_grad=True))
    return out
