"""Analytic gradients and their finite-difference verification.

``finite_diff_check`` is the trust anchor for the whole training stack:
any loss wired through the tape can be cross-checked against central
differences without writing a second implementation.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..errors import ContractError
from .tensor import Tensor, no_grad

__all__ = ["grad", "finite_diff_check"]


def grad(loss_fn: Callable[[], Tensor], params: list[Tensor]) -> list[np.ndarray]:
    """Evaluate loss_fn and return d(loss)/d(p) for each param.

    Parameters not reached by the loss get zero gradients. The loss must
    be a finite scalar.
    """
    for p in params:
        p.grad = None
    loss = loss_fn()
    if loss.data.size != 1:
        raise ContractError(f"loss must be scalar, got shape {loss.data.shape}")
    if not np.isfinite(loss.data).all():
        raise ContractError(f"loss is not finite: {float(loss.data.reshape(()))}")
    loss.backward()
    return [
        p.grad.copy() if p.grad is not None else np.zeros_like(p.data)
        for p in params
    ]


def finite_diff_check(
    loss_fn: Callable[[], Tensor],
    params: list[Tensor],
    eps: float = 1e-5,
) -> float:
    """Worst relative error between tape gradients and central differences.

    Each parameter entry is perturbed in place by +-eps (and restored
    exactly); rel err uses max(|analytic|, |numeric|, 1e-12) as the
    denominator.
    """
    analytic = grad(loss_fn, params)
    worst = 0.0
    for p, a in zip(params, analytic):
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            with no_grad():
                flat[i] = original + eps
                hi = loss_fn().item()
                flat[i] = original - eps
                lo = loss_fn().item()
                flat[i] = original
            numeric = (hi - lo) / (2.0 * eps)
            a_i = a.reshape(-1)[i]
            denom = max(abs(a_i), abs(numeric), 1e-12)
            worst = max(worst, abs(a_i - numeric) / denom)
    return worst
