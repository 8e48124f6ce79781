"""Minimal dense float64 tensors for the optimizer update rules.

A Tensor is a shape plus a flat, row-major float64 buffer. Element-wise
binary ops require identical shapes -- there is no tensor-to-tensor
broadcasting, so every update rule transcribes into code one symbol at a
time. Scalars may combine with tensors (scale/shift); that is unambiguous
and keeps expressions readable.

All operations are pure: they return new tensors and never mutate their
operands, so values can be shared across threads freely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Tensor",
    "ShapeMismatchError",
    "tensor",
    "zeros",
    "fill",
    "zeros_like",
    "ones_like",
    "add",
    "sub",
    "scale",
    "hadamard",
    "hadamard_exp",
    "sigmoid",
    "absolute",
    "square",
    "sqrt",
    "maximum",
    "divide",
    "elem_max_scalar",
]


class ShapeMismatchError(ValueError):
    """Element-wise op applied to tensors of different shapes."""


def _check_same_shape(a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"shape mismatch: {a.shape} vs {b.shape}")


@dataclass(frozen=True, eq=False)
class Tensor:
    """Shape plus flat row-major float64 buffer; buffer length == prod(shape)."""

    shape: tuple[int, ...]
    data: np.ndarray

    def __post_init__(self) -> None:
        if not isinstance(self.data, np.ndarray) or self.data.ndim != 1:
            raise ValueError("tensor buffer must be a 1-D numpy array")
        if self.data.dtype != np.float64:
            raise ValueError("tensor buffer must be float64")
        if self.data.size != math.prod(self.shape):
            raise ValueError(
                f"buffer length {self.data.size} does not match shape {self.shape}"
            )

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.size != 1:
            raise ValueError(f"item() on tensor of size {self.size}")
        return float(self.data[0])

    def tolist(self) -> list[float]:
        return self.data.tolist()

    def as_array(self) -> np.ndarray:
        """Shaped ndarray view of the buffer. Treat as read-only."""
        return self.data.reshape(self.shape)

    def copy(self) -> Tensor:
        return Tensor(self.shape, self.data.copy())

    # Scalar-aware operators so update rules read like their formulas.
    def __add__(self, other: Tensor | float) -> Tensor:
        if isinstance(other, Tensor):
            return add(self, other)
        return Tensor(self.shape, self.data + float(other))

    __radd__ = __add__

    def __sub__(self, other: Tensor | float) -> Tensor:
        if isinstance(other, Tensor):
            return sub(self, other)
        return Tensor(self.shape, self.data - float(other))

    def __mul__(self, other: Tensor | float) -> Tensor:
        if isinstance(other, Tensor):
            return hadamard(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __truediv__(self, other: Tensor | float) -> Tensor:
        if isinstance(other, Tensor):
            return divide(self, other)
        return Tensor(self.shape, self.data / float(other))

    def __neg__(self) -> Tensor:
        return Tensor(self.shape, -self.data)

    def __abs__(self) -> Tensor:
        return absolute(self)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, data={self.data.tolist()})"


def tensor(values, shape: tuple[int, ...] | None = None) -> Tensor:
    """Build a tensor from (possibly nested) values; shape is inferred."""
    arr = np.asarray(values, dtype=np.float64)
    if shape is None:
        shape = arr.shape
    return Tensor(tuple(int(d) for d in shape), arr.ravel(order="C").copy())


def zeros(shape: tuple[int, ...]) -> Tensor:
    shape = tuple(int(d) for d in shape)
    return Tensor(shape, np.zeros(math.prod(shape), dtype=np.float64))


def fill(shape: tuple[int, ...], value: float) -> Tensor:
    shape = tuple(int(d) for d in shape)
    return Tensor(shape, np.full(math.prod(shape), float(value), dtype=np.float64))


def zeros_like(a: Tensor) -> Tensor:
    return zeros(a.shape)


def ones_like(a: Tensor) -> Tensor:
    return fill(a.shape, 1.0)


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b)
    return Tensor(a.shape, a.data + b.data)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b)
    return Tensor(a.shape, a.data - b.data)


def scale(a: Tensor, s: float) -> Tensor:
    return Tensor(a.shape, float(s) * a.data)


def hadamard(a: Tensor, b: Tensor) -> Tensor:
    """Element-wise product; shapes must match exactly."""
    _check_same_shape(a, b)
    return Tensor(a.shape, a.data * b.data)


def hadamard_exp(a: Tensor) -> Tensor:
    """Element-wise exponential e**a[i]."""
    return Tensor(a.shape, np.exp(a.data))


def sigmoid(a: Tensor) -> Tensor:
    """Element-wise 1/(1 + e**-x). Saturates to 0/1 for |x| beyond ~36."""
    return Tensor(a.shape, 1.0 / (1.0 + np.exp(-a.data)))


def absolute(a: Tensor) -> Tensor:
    return Tensor(a.shape, np.abs(a.data))


def square(a: Tensor) -> Tensor:
    return Tensor(a.shape, a.data * a.data)


def sqrt(a: Tensor) -> Tensor:
    return Tensor(a.shape, np.sqrt(a.data))


def maximum(a: Tensor, b: Tensor) -> Tensor:
    """Element-wise max of two same-shaped tensors."""
    _check_same_shape(a, b)
    return Tensor(a.shape, np.maximum(a.data, b.data))


def divide(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b)
    return Tensor(a.shape, a.data / b.data)


def elem_max_scalar(a: Tensor) -> float:
    """Largest element value."""
    if a.size == 0:
        raise ValueError("max of an empty tensor")
    return float(np.max(a.data))
