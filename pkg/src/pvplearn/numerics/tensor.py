"""Dense float64 tensors with a reverse-mode differentiation tape.

Everything runs on row-major float64 numpy arrays and is deterministic:
no op introduces thread- or order-dependent reductions. Tensors are
treated as immutable values; optimizer steps produce fresh leaves rather
than writing into existing ones, so tensors are safe to share across
threads.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Sequence

import numpy as np

from ..errors import ContractError, ShapeError

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
]

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (forward values only)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def is_grad_enabled() -> bool:
    return _GRAD_ENABLED


class Tensor:
    """A float64 array plus the tape node that produced it.

    ``requires_grad`` on a leaf marks it as trainable; on interior nodes
    it is derived from the parents. ``grad`` is populated by
    ``backward()`` and holds a plain ndarray of the same shape.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    # ------------------------------------------------------------------
    # introspection

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.data.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        """A defensive copy of the underlying values."""
        return self.data.copy()

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    # ------------------------------------------------------------------
    # autograd plumbing

    def backward(self) -> None:
        """Reverse-mode sweep seeding d(self)/d(self) = 1.

        Accumulates into ``.grad`` of every reachable tensor that
        requires grad. Only valid on scalars.
        """
        if self.data.size != 1:
            raise ContractError(
                f"backward() requires a scalar loss, got shape {self.data.shape}"
            )
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, emitted = stack.pop()
            if emitted:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))
        _accumulate(self, np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # ------------------------------------------------------------------
    # arithmetic

    def __add__(self, other):
        other = _ensure_tensor(other)
        out = self.data + other.data

        def backward(g: np.ndarray) -> None:
            if self.requires_grad:
                _accumulate(self, _unbroadcast(g, self.data.shape))
            if other.requires_grad:
                _accumulate(other, _unbroadcast(g, other.data.shape))

        return _make(out, (self, other), backward)

    def __radd__(self, other):
        return _ensure_tensor(other).__add__(self)

    def __sub__(self, other):
        other = _ensure_tensor(other)
        out = self.data - other.data

        def backward(g: np.ndarray) -> None:
            if self.requires_grad:
                _accumulate(self, _unbroadcast(g, self.data.shape))
            if other.requires_grad:
                _accumulate(other, _unbroadcast(-g, other.data.shape))

        return _make(out, (self, other), backward)

    def __rsub__(self, other):
        return _ensure_tensor(other).__sub__(self)

    def __neg__(self):
        def backward(g: np.ndarray) -> None:
            if self.requires_grad:
                _accumulate(self, -g)

        return _make(-self.data, (self,), backward)

    def __mul__(self, other):
        other = _ensure_tensor(other)
        out = self.data * other.data

        def backward(g: np.ndarray) -> None:
            if self.requires_grad:
                _accumulate(self, _unbroadcast(g * other.data, self.data.shape))
            if other.requires_grad:
                _accumulate(other, _unbroadcast(g * self.data, other.data.shape))

        return _make(out, (self, other), backward)

    def __rmul__(self, other):
        return _ensure_tensor(other).__mul__(self)

    def __truediv__(self, other):
        other = _ensure_tensor(other)
        out = self.data / other.data

        def backward(g: np.ndarray) -> None:
            if self.requires_grad:
                _accumulate(self, _unbroadcast(g / other.data, self.data.shape))
            if other.requires_grad:
                _accumulate(
                    other, _unbroadcast(-g * out / other.data, other.data.shape)
                )

        return _make(out, (self, other), backward)

    def __rtruediv__(self, other):
        return _ensure_tensor(other).__truediv__(self)

    def __pow__(self, exponent):
        if not isinstance(exponent, (int, float)):
            raise ShapeError("only scalar exponents are supported")
        c = float(exponent)
        out = self.data**c

        def backward(g: np.ndarray) -> None:
            if self.requires_grad:
                _accumulate(self, g * c * self.data ** (c - 1.0))

        return _make(out, (self,), backward)

    def __matmul__(self, other):
        other = _ensure_tensor(other)
        if self.data.ndim != 2 or other.data.ndim != 2:
            raise ShapeError(
                f"matmul expects 2-D operands, got {self.data.shape} @ {other.data.shape}"
            )
        if self.data.shape[1] != other.data.shape[0]:
            raise ShapeError(
                f"matmul inner extents differ: {self.data.shape} @ {other.data.shape}"
            )
        out = self.data @ other.data

        def backward(g: np.ndarray) -> None:
            if self.requires_grad:
                _accumulate(self, g @ other.data.T)
            if other.requires_grad:
                _accumulate(other, self.data.T @ g)

        return _make(out, (self, other), backward)

    # ------------------------------------------------------------------
    # elementwise nonlinearities

    def relu(self):
        mask = self.data > 0  # subgradient 0 at exact equality
        out = np.where(mask, self.data, 0.0)

        def backward(g: np.ndarray) -> None:
            if self.requires_grad:
                _accumulate(self, g * mask)

        return _make(out, (self,), backward)

    def exp(self):
        out = np.exp(self.data)

        def backward(g: np.ndarray) -> None:
            if self.requires_grad:
                _accumulate(self, g * out)

        return _make(out, (self,), backward)

    def log(self):
        out = np.log(self.data)

        def backward(g: np.ndarray) -> None:
            if self.requires_grad:
                _accumulate(self, g / self.data)

        return _make(out, (self,), backward)

    def sqrt(self):
        out = np.sqrt(self.data)

        def backward(g: np.ndarray) -> None:
            if self.requires_grad:
                _accumulate(self, g / (2.0 * out))

        return _make(out, (self,), backward)

    # ------------------------------------------------------------------
    # reductions and reshaping

    def sum(self, axis=None, keepdims: bool = False):
        out = self.data.sum(axis=axis, keepdims=keepdims)

        def backward(g: np.ndarray) -> None:
            if not self.requires_grad:
                return
            expanded = g
            if axis is not None and not keepdims:
                expanded = np.expand_dims(g, axis)
            _accumulate(self, np.broadcast_to(expanded, self.data.shape).copy())

        return _make(out, (self,), backward)

    def mean(self, axis=None, keepdims: bool = False):
        count = self.data.size if axis is None else np.prod(
            [self.data.shape[a] for a in np.atleast_1d(axis)]
        )
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / float(count))

    def reshape(self, shape):
        out = self.data.reshape(shape)

        def backward(g: np.ndarray) -> None:
            if self.requires_grad:
                _accumulate(self, g.reshape(self.data.shape))

        return _make(out, (self,), backward)

    def transpose(self, axes=None):
        out = self.data.transpose(axes)
        inverse = None if axes is None else tuple(np.argsort(axes))

        def backward(g: np.ndarray) -> None:
            if self.requires_grad:
                _accumulate(self, g.transpose(inverse))

        return _make(out, (self,), backward)

    @property
    def T(self):
        return self.transpose()

    def __getitem__(self, index):
        out = self.data[index]
        if np.isscalar(out) or out.ndim == 0:
            out = np.asarray(out, dtype=np.float64)
        else:
            out = out.copy()

        def backward(g: np.ndarray) -> None:
            if self.requires_grad:
                scatter = np.zeros_like(self.data)
                np.add.at(scatter, index, g)
                _accumulate(self, scatter)

        return _make(out, (self,), backward)


# ----------------------------------------------------------------------
# free functions


def _ensure_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcasted gradient back to the operand's shape."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, s) in enumerate(zip(g.shape, shape)) if s == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [_ensure_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g: np.ndarray) -> None:
        for t, start, stop in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(start, stop)
                _accumulate(t, g[tuple(sl)])

    return _make(out, tuple(tensors), backward)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [_ensure_tensor(t) for t in tensors]
    out = np.stack([t.data for t in tensors], axis=axis)

    def backward(g: np.ndarray) -> None:
        for i, t in enumerate(tensors):
            if t.requires_grad:
                _accumulate(t, np.take(g, i, axis=axis))

    return _make(out, tuple(tensors), backward)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    x = _ensure_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            inner = (g * out).sum(axis=axis, keepdims=True)
            _accumulate(x, out * (g - inner))

    return _make(out, (x,), backward)


def logsumexp(x: Tensor, axis: int, keepdims: bool = False) -> Tensor:
    x = _ensure_tensor(x)
    m = x.data.max(axis=axis, keepdims=True)
    out = np.log(np.exp(x.data - m).sum(axis=axis, keepdims=True)) + m
    soft = np.exp(x.data - out)
    if not keepdims:
        out = np.squeeze(out, axis=axis)

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            expanded = g if keepdims else np.expand_dims(g, axis)
            _accumulate(x, soft * expanded)

    return _make(out, (x,), backward)


def softplus(x: Tensor) -> Tensor:
    """log(1 + e^x), evaluated without overflow."""
    x = _ensure_tensor(x)
    out = np.logaddexp(0.0, x.data)

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            _accumulate(x, g / (1.0 + np.exp(-x.data)))

    return _make(out, (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    x = _ensure_tensor(x)
    out = 1.0 / (1.0 + np.exp(-x.data))

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            _accumulate(x, g * out * (1.0 - out))

    return _make(out, (x,), backward)


def l2_normalize(x: Tensor, axis: int = -1) -> Tensor:
    """Rows scaled to unit Euclidean norm along ``axis``."""
    x = _ensure_tensor(x)
    norm = (x * x).sum(axis=axis, keepdims=True).sqrt()
    return x / norm
