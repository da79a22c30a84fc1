"""
Dense tensor substrate.

Tensors are numpy arrays (row-major, float32 or float64). Every forward
operation has a vector-Jacobian product named <op>_vjp.
"""
from .dense import (
    Tensor,
    ElementwiseOp,
    accuracy,
    cross_entropy,
    cross_entropy_vjp,
    elementwise,
    elementwise_vjp,
    log_softmax,
    matmul,
    matmul_vjp,
    relu,
    softmax_scaled,
    softmax_scaled_vjp,
    unbroadcast,
)
from .conv import conv2d, conv2d_vjp, maxpool2d, maxpool2d_vjp

__all__ = [
    'Tensor',
    'ElementwiseOp',
    'accuracy',
    'conv2d',
    'conv2d_vjp',
    'cross_entropy',
    'cross_entropy_vjp',
    'elementwise',
    'elementwise_vjp',
    'log_softmax',
    'matmul',
    'matmul_vjp',
    'maxpool2d',
    'maxpool2d_vjp',
    'relu',
    'softmax_scaled',
    'softmax_scaled_vjp',
    'unbroadcast',
]
