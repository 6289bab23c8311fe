"""Counter-based random sources keyed by (seed, stream).

Every random draw in the package flows through here. Philox generators
give identical sequences for identical keys regardless of how many other
generators were created first, which keeps checkpoints byte-reproducible
when code paths are reordered.
"""

from __future__ import annotations

import numpy as np

from ..errors import ParameterError
from .tensor import Tensor

__all__ = ["philox_generator", "gaussian_init"]


def philox_generator(seed: int, stream: int = 0) -> np.random.Generator:
    """A generator whose output depends only on (seed, stream)."""
    key = np.array([seed, stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def gaussian_init(
    shape: tuple[int, ...],
    mean: float = 0.0,
    std: float = 0.02,
    seed: int = 0,
    stream: int = 0,
    requires_grad: bool = True,
) -> Tensor:
    """A tensor drawn i.i.d. from N(mean, std^2).

    std=0 yields the constant ``mean``; negative std or an empty shape is
    rejected.
    """
    if std < 0:
        raise ParameterError(f"std must be non-negative, got {std}")
    if len(shape) == 0:
        raise ParameterError("shape must have at least one axis")
    if any(s <= 0 for s in shape):
        raise ParameterError(f"all extents must be positive, got {shape}")
    if std == 0:
        data = np.full(shape, float(mean), dtype=np.float64)
    else:
        rng = philox_generator(seed, stream)
        data = rng.normal(loc=mean, scale=std, size=shape)
    return Tensor(data, requires_grad=requires_grad)
