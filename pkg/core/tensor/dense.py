"""
Dense primitives on the last axes: matmul, scaled softmax, pointwise maps,
cross entropy. Every forward has a matching *_vjp.
"""
from __future__ import annotations

from enum import Enum
from typing import Sequence, Tuple, Union

import numpy as np

from core.errors import ArgumentError, DimensionError
from core.runtime import runtime

Tensor = np.ndarray


def unbroadcast(grad: Tensor, shape: Tuple[int, ...]) -> Tensor:
    """
    Sum a broadcast gradient back down to an operand's shape

    :param grad: Tensor, gradient with the broadcast shape
    :param shape: Tuple[int, ...], operand shape
    :returns: Tensor, gradient with the operand shape
    """
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """
    Matrix product over the last two axes, leading axes broadcast

    :param a: Tensor, [..., m, p]
    :param b: Tensor, [..., p, q]
    :returns: Tensor, [..., m, q]
    :raises DimensionError: if inner extents or batch axes disagree
    """
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    runtime.check_finite("matmul", a, b)
    try:
        return np.matmul(a, b)
    except ValueError as e:
        raise DimensionError(f"matmul: cannot broadcast {a.shape} with {b.shape}") from e


def matmul_vjp(a: Tensor, b: Tensor, dy: Tensor) -> Tuple[Tensor, Tensor]:
    da = np.matmul(dy, np.swapaxes(b, -1, -2))
    db = np.matmul(np.swapaxes(a, -1, -2), dy)
    return unbroadcast(da, a.shape), unbroadcast(db, b.shape)


def softmax_scaled(x: Tensor, scale: float) -> Tensor:
    """
    Softmax of x / scale along the last axis

    :param x: Tensor, [..., n]
    :param scale: float, positive temperature (sqrt of head dim in attention)
    :returns: Tensor, rows non-negative and summing to 1
    :raises ArgumentError: if scale <= 0
    """
    if not scale > 0:
        raise ArgumentError(f"softmax scale must be positive, got {scale}")
    runtime.check_finite("softmax_scaled", x)
    z = x / scale
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_scaled_vjp(y: Tensor, scale: float, dy: Tensor) -> Tensor:
    """Gradient wrt the logits, given the softmax output y"""
    return y * (dy - (dy * y).sum(axis=-1, keepdims=True)) / scale


class ElementwiseOp(str, Enum):
    RELU = "relu"
    ADD_CONST = "add_const"
    MUL_CONST = "mul_const"
    ADD = "add"
    MUL = "mul"


Operand = Union[None, float, Tensor]


def _check_operand(x: Tensor, op: ElementwiseOp, operand: Operand) -> None:
    if op in (ElementwiseOp.ADD, ElementwiseOp.MUL):
        if not isinstance(operand, np.ndarray) or operand.shape != x.shape:
            shape = getattr(operand, "shape", None)
            raise DimensionError(f"{op.value}: operand shape {shape} differs from {x.shape}")
    elif op in (ElementwiseOp.ADD_CONST, ElementwiseOp.MUL_CONST):
        if operand is None or np.ndim(operand) != 0:
            raise ArgumentError(f"{op.value}: needs a scalar operand")


def elementwise(x: Tensor, op: ElementwiseOp, operand: Operand = None) -> Tensor:
    """
    Pointwise map

    :param x: Tensor, input
    :param op: ElementwiseOp, which map
    :param operand: scalar for *_const, equal-shape tensor for add/mul
    :returns: Tensor, same shape as x
    """
    op = ElementwiseOp(op)
    _check_operand(x, op, operand)
    runtime.check_finite(op.value, x)
    if op is ElementwiseOp.RELU:
        return np.maximum(x, 0.0)
    if op in (ElementwiseOp.ADD, ElementwiseOp.ADD_CONST):
        return x + operand
    return x * operand


def elementwise_vjp(
    x: Tensor, op: ElementwiseOp, operand: Operand, dy: Tensor
) -> Tuple[Tensor, Operand]:
    """
    :returns: (dx, doperand); doperand is None for relu, a float for *_const
    """
    op = ElementwiseOp(op)
    if op is ElementwiseOp.RELU:
        return dy * (x > 0), None
    if op is ElementwiseOp.ADD:
        return dy, dy
    if op is ElementwiseOp.ADD_CONST:
        return dy, float(dy.sum())
    if op is ElementwiseOp.MUL:
        return dy * operand, dy * x
    return dy * operand, float((dy * x).sum())


def relu(x: Tensor) -> Tensor:
    return elementwise(x, ElementwiseOp.RELU)


def _check_labels(labels: Sequence[int], batch: int, classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (batch,):
        raise DimensionError(f"cross_entropy: {labels.shape[0]} labels for batch of {batch}")
    if labels.size and (labels.min() < 0 or labels.max() >= classes):
        raise ArgumentError(f"cross_entropy: labels must lie in [0, {classes})")
    return labels


def log_softmax(logits: Tensor) -> Tensor:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def cross_entropy(logits: Tensor, labels: Sequence[int]) -> float:
    """
    Mean negative log-likelihood, computed in log space

    :param logits: Tensor, [b, c]
    :param labels: Sequence[int], b class indices
    :returns: float, loss
    """
    if logits.ndim != 2:
        raise DimensionError(f"cross_entropy: logits must be [b, c], got {logits.shape}")
    labels = _check_labels(labels, *logits.shape)
    runtime.check_finite("cross_entropy", logits)
    logp = log_softmax(logits)
    return float(-logp[np.arange(labels.shape[0]), labels].mean())


def cross_entropy_vjp(logits: Tensor, labels: Sequence[int], dloss: float = 1.0) -> Tensor:
    labels = _check_labels(labels, *logits.shape)
    grad = np.exp(log_softmax(logits))
    grad[np.arange(labels.shape[0]), labels] -= 1.0
    return grad * (dloss / logits.shape[0])


def accuracy(logits: Tensor, labels: Sequence[int]) -> float:
    labels = np.asarray(labels)
    return float((logits.argmax(axis=-1) == labels).mean())

