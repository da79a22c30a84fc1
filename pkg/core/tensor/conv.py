"""
Spatial primitives on [..., C, H, W]: cross-correlation conv2d and max
pooling, im2col via strided window views.
"""
from __future__ import annotations

from typing import Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from core.errors import ArgumentError, DimensionError
from core.runtime import runtime
from core.schema import conv_out_extent

Tensor = np.ndarray


def _as_batch(x: Tensor, name: str) -> Tuple[Tensor, Tuple[int, ...]]:
    if x.ndim < 3:
        raise DimensionError(f"{name}: expected [..., C, H, W], got {x.shape}")
    lead = x.shape[:-3]
    return x.reshape((-1,) + x.shape[-3:]), lead


def _check_window(name: str, shape: Tuple[int, ...], k: int, stride: int, pad: int) -> Tuple[int, int]:
    if k < 1 or stride < 1 or pad < 0:
        raise ArgumentError(f"{name}: need k >= 1, stride >= 1, pad >= 0; got k={k}, stride={stride}, pad={pad}")
    height, width = shape[-2:]
    if k > height + 2 * pad or k > width + 2 * pad:
        raise DimensionError(f"{name}: window {k} exceeds padded input {height}x{width} (pad {pad})")
    return conv_out_extent(height, k, stride, pad), conv_out_extent(width, k, stride, pad)


def _windows(xp: Tensor, k: int, stride: int) -> Tensor:
    """[B, C, Hp, Wp] -> [B, C, H', W', k, k] view"""
    win = sliding_window_view(xp, (k, k), axis=(-2, -1))
    return win[:, :, ::stride, ::stride]


def _pad(x: Tensor, pad: int, value: float) -> Tensor:
    if pad == 0:
        return x
    widths = ((0, 0), (0, 0), (pad, pad), (pad, pad))
    return np.pad(x, widths, mode="constant", constant_values=value)


def conv2d(x: Tensor, kernels: Tensor, stride: int = 1, pad: int = 0) -> Tensor:
    """
    Zero-padded 2-D cross-correlation (no kernel flip)

    :param x: Tensor, [..., C, H, W]
    :param kernels: Tensor, [F, C, k, k]
    :param stride: int, positive step
    :param pad: int, zero padding on every side
    :returns: Tensor, [..., F, H', W'] with H' = floor((H + 2·pad − k) / stride) + 1
    :raises DimensionError: if the kernel exceeds the padded input or channels disagree
    """
    xb, lead = _as_batch(x, "conv2d")
    if kernels.ndim != 4 or kernels.shape[1] != xb.shape[1] or kernels.shape[2] != kernels.shape[3]:
        raise DimensionError(f"conv2d: kernels {kernels.shape} do not match input {x.shape}")
    k = kernels.shape[-1]
    out_h, out_w = _check_window("conv2d", xb.shape, k, stride, pad)
    runtime.check_finite("conv2d", x, kernels)

    cols = _windows(_pad(xb, pad, 0.0), k, stride)
    out = np.einsum("bchwij,fcij->bfhw", cols, kernels, optimize=True)
    return out.reshape(lead + (kernels.shape[0], out_h, out_w))


def conv2d_vjp(
    x: Tensor, kernels: Tensor, stride: int, pad: int, dy: Tensor
) -> Tuple[Tensor, Tensor]:
    """
    :returns: (dx, dkernels)
    """
    xb, lead = _as_batch(x, "conv2d")
    k = kernels.shape[-1]
    out_h, out_w = _check_window("conv2d", xb.shape, k, stride, pad)
    dyb = dy.reshape((xb.shape[0], kernels.shape[0], out_h, out_w))

    cols = _windows(_pad(xb, pad, 0.0), k, stride)
    dkernels = np.einsum("bchwij,bfhw->fcij", cols, dyb, optimize=True)

    height, width = xb.shape[-2:]
    dxp = np.zeros(xb.shape[:2] + (height + 2 * pad, width + 2 * pad), dtype=dyb.dtype)
    row_stop = stride * (out_h - 1) + 1
    col_stop = stride * (out_w - 1) + 1
    for i in range(k):
        for j in range(k):
            dxp[:, :, i:i + row_stop:stride, j:j + col_stop:stride] += np.einsum(
                "bfhw,fc->bchw", dyb, kernels[:, :, i, j], optimize=True
            )
    dx = dxp[:, :, pad:pad + height, pad:pad + width]
    return dx.reshape(x.shape), dkernels


def _pool_argmax(xb: Tensor, k: int, stride: int, pad: int) -> Tuple[Tensor, Tensor]:
    cols = _windows(_pad(xb, pad, -np.inf), k, stride)
    flat = cols.reshape(cols.shape[:4] + (k * k,))
    arg = flat.argmax(axis=-1)
    return np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0], arg


def _check_pool(x: Tensor, k: int, stride: int, pad: int) -> Tuple[int, int]:
    out = _check_window("maxpool2d", x.shape, k, stride, pad)
    # pad < k keeps a real cell in every window
    if pad >= k:
        raise ArgumentError(f"maxpool2d: pad {pad} must be smaller than the window {k}")
    return out


def maxpool2d(x: Tensor, k: int, stride: int, pad: int = 0) -> Tensor:
    """
    Per-window maximum; padded cells hold -inf and never win

    :param x: Tensor, [..., C, H, W]
    :param k: int, window extent
    :param stride: int, positive step
    :param pad: int, below k
    :returns: Tensor, [..., C, H', W']
    """
    xb, lead = _as_batch(x, "maxpool2d")
    out_h, out_w = _check_pool(xb, k, stride, pad)
    runtime.check_finite("maxpool2d", x)
    out, _ = _pool_argmax(xb, k, stride, pad)
    return out.reshape(lead + (xb.shape[1], out_h, out_w))


def maxpool2d_vjp(x: Tensor, k: int, stride: int, pad: int, dy: Tensor) -> Tensor:
    """Route each output gradient to its window's (first) maximum"""
    xb, _ = _as_batch(x, "maxpool2d")
    out_h, out_w = _check_pool(xb, k, stride, pad)
    _, arg = _pool_argmax(xb, k, stride, pad)
    batch, channels, height, width = xb.shape

    rows = np.arange(out_h)[:, None] * stride + arg // k
    cols = np.arange(out_w)[None, :] * stride + arg % k
    b_idx = np.arange(batch)[:, None, None, None]
    c_idx = np.arange(channels)[None, :, None, None]

    dxp = np.zeros((batch, channels, height + 2 * pad, width + 2 * pad), dtype=dy.dtype)
    np.add.at(dxp, (b_idx, c_idx, rows, cols), dy.reshape(arg.shape))
    return dxp[:, :, pad:pad + height, pad:pad + width].reshape(x.shape)
