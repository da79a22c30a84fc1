"""
Ingestion and egress operators of compact transformers

- conv_tokenize: overlapping conv -> relu -> maxpool stack, any image size
- patch_tokenize: non-overlapping ViT patches, extents must divide evenly
- seqpool: softmax-weighted pooling of the output sequence
- positional_embedding: none, fixed sinusoidal or learnable tables
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from core.errors import ArgumentError, DimensionError
from core.runtime import runtime
from core.schema import TokenizerConfig
from core.tensor import (
    conv2d,
    conv2d_vjp,
    elementwise_vjp,
    ElementwiseOp,
    maxpool2d,
    maxpool2d_vjp,
    relu,
    softmax_scaled,
    softmax_scaled_vjp,
)

Tensor = np.ndarray


def init_tokenizer_weights(
    cfg: TokenizerConfig, rng: np.random.Generator, dtype=None
) -> List[Tensor]:
    """He-normal kernels, one [F, C, k, k] array per block"""
    dtype = dtype or runtime.dtype
    weights = []
    for shape in cfg.weight_shapes():
        fan_in = shape[1] * shape[2] * shape[3]
        weights.append((rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype))
    return weights


@dataclass(eq=False)
class TokenizerState:
    """Per-block inputs and conv outputs kept for backward"""
    cfg: TokenizerConfig
    weights: List[Tensor]
    inputs: List[Tensor] = field(default_factory=list)
    convs: List[Tensor] = field(default_factory=list)
    grid: Tuple[int, int] = (0, 0)
    feature_shape: Tuple[int, ...] = ()


def _check_image(image: Tensor, cfg: TokenizerConfig) -> None:
    if image.ndim < 3 or image.shape[-3] != cfg.in_channels:
        raise DimensionError(f"tokenizer expects [..., {cfg.in_channels}, H, W], got {image.shape}")
    if cfg.output_grid(*image.shape[-2:]) == (0, 0):
        raise DimensionError(
            f"image {image.shape[-2]}x{image.shape[-1]} is smaller than the tokenizer minimum {cfg.min_size()}"
        )


def conv_tokenize_forward(
    image: Tensor, cfg: TokenizerConfig, weights: Sequence[Tensor]
) -> Tuple[Tensor, TokenizerState]:
    """
    :param image: Tensor, [..., C, H, W]
    :param cfg: TokenizerConfig, blocks and pooling
    :param weights: Sequence[Tensor], one kernel per block
    :returns: (tokens [..., H'·W', d] in row-major grid order, state)
    """
    _check_image(image, cfg)
    if [w.shape for w in weights] != cfg.weight_shapes():
        raise DimensionError(f"tokenizer weights {[w.shape for w in weights]} != {cfg.weight_shapes()}")

    state = TokenizerState(cfg=cfg, weights=list(weights))
    x = image
    pool = cfg.pool
    for block, kernels in zip(cfg.blocks, weights):
        state.inputs.append(x)
        conv = conv2d(x, kernels, block.stride, block.pad)
        state.convs.append(conv)
        x = maxpool2d(relu(conv), pool.kernel, pool.stride, pool.pad)

    state.feature_shape = x.shape
    state.grid = x.shape[-2:]
    grid = np.moveaxis(x, -3, -1)
    tokens = grid.reshape(grid.shape[:-3] + (-1, grid.shape[-1]))
    return tokens, state


def conv_tokenize(image: Tensor, cfg: TokenizerConfig, weights: Sequence[Tensor]) -> Tensor:
    return conv_tokenize_forward(image, cfg, weights)[0]


def conv_tokenize_vjp(state: TokenizerState, dtokens: Tensor) -> Tuple[Tensor, List[Tensor]]:
    """
    :returns: (dimage, one dkernels per block)
    """
    height, width = state.grid
    features = state.feature_shape
    dgrid = dtokens.reshape(features[:-3] + (height, width, features[-3]))
    dx = np.moveaxis(dgrid, -1, -3)

    pool = state.cfg.pool
    dkernels: List[Tensor] = []
    for block, kernels, x, conv in reversed(list(zip(state.cfg.blocks, state.weights, state.inputs, state.convs))):
        dact = maxpool2d_vjp(relu(conv), pool.kernel, pool.stride, pool.pad, dx)
        dconv, _ = elementwise_vjp(conv, ElementwiseOp.RELU, None, dact)
        dx, dk = conv2d_vjp(x, kernels, block.stride, block.pad, dconv)
        dkernels.append(dk)
    return dx, dkernels[::-1]


def _patches(image: Tensor, patch: int) -> Tensor:
    channels, height, width = image.shape[-3:]
    if patch < 1 or height % patch or width % patch:
        raise DimensionError(f"patch {patch} does not evenly divide {height}x{width}")
    lead = image.shape[:-3]
    blocks = image.reshape(lead + (channels, height // patch, patch, width // patch, patch))
    nd = len(lead)
    order = tuple(range(nd)) + tuple(nd + a for a in (1, 3, 0, 2, 4))
    blocks = blocks.transpose(order)
    return blocks.reshape(lead + ((height // patch) * (width // patch), channels * patch * patch))


def patch_tokenize(image: Tensor, patch: int, projection: Tensor) -> Tensor:
    """
    Non-overlapping patches, each flattened (C, p, p) and projected

    :param image: Tensor, [..., C, H, W] with patch dividing H and W
    :param patch: int, patch side
    :param projection: Tensor, [C·patch², d]
    :returns: Tensor, [..., (H/patch)·(W/patch), d]
    """
    if image.ndim < 3:
        raise DimensionError(f"patch_tokenize expects [..., C, H, W], got {image.shape}")
    rows = image.shape[-3] * patch * patch
    if projection.ndim != 2 or projection.shape[0] != rows:
        raise DimensionError(f"projection {projection.shape} needs {rows} rows")
    runtime.check_finite("patch_tokenize", image, projection)
    return _patches(image, patch) @ projection


def patch_tokenize_vjp(
    image: Tensor, patch: int, projection: Tensor, dtokens: Tensor
) -> Tuple[Tensor, Tensor]:
    flat = _patches(image, patch)
    dprojection = flat.reshape(-1, flat.shape[-1]).T @ dtokens.reshape(-1, projection.shape[1])
    dflat = dtokens @ projection.T

    channels, height, width = image.shape[-3:]
    lead = image.shape[:-3]
    nd = len(lead)
    blocks = dflat.reshape(lead + (height // patch, width // patch, channels, patch, patch))
    order = tuple(range(nd)) + tuple(nd + a for a in (2, 0, 3, 1, 4))
    return blocks.transpose(order).reshape(image.shape), dprojection


@dataclass(eq=False)
class SeqPoolWeights:
    """Token scorer g: one weight per channel plus an offset"""
    g: Tensor
    offset: float = 0.0

    @classmethod
    def zeros(cls, d: int, dtype=None) -> "SeqPoolWeights":
        return cls(np.zeros(d, dtype=dtype or runtime.dtype))


def seqpool_forward(x: Tensor, weights: SeqPoolWeights) -> Tuple[Tensor, Tensor]:
    """
    Softmax over per-token scores x·g + offset, then the weighted token sum

    :param x: Tensor, [..., n, d]
    :param weights: SeqPoolWeights, g of length d
    :returns: (pooled [..., d], token weights [..., n])
    :raises DimensionError: on an empty sequence or width mismatch
    """
    if x.ndim < 2 or x.shape[-2] < 1:
        raise DimensionError(f"seqpool needs a non-empty sequence, got {x.shape}")
    if weights.g.shape != (x.shape[-1],):
        raise DimensionError(f"seqpool g {weights.g.shape} does not match width {x.shape[-1]}")
    runtime.check_finite("seqpool", x, weights.g)
    attn = softmax_scaled(x @ weights.g + weights.offset, 1.0)
    return np.matmul(attn[..., None, :], x)[..., 0, :], attn


def seqpool(x: Tensor, weights: SeqPoolWeights) -> Tensor:
    return seqpool_forward(x, weights)[0]


def seqpool_vjp(
    x: Tensor, weights: SeqPoolWeights, attn: Tensor, dout: Tensor
) -> Tuple[Tensor, Tensor, float]:
    """
    :returns: (dx, dg, doffset); doffset is zero since the softmax ignores shifts
    """
    dattn = np.matmul(x, dout[..., None])[..., 0]
    dscores = softmax_scaled_vjp(attn, 1.0, dattn)
    dx = attn[..., None] * dout[..., None, :] + dscores[..., None] * weights.g
    dg = (dscores[..., None] * x).reshape(-1, x.shape[-1]).sum(axis=0)
    return dx, dg, float(dscores.sum())


class PositionalKind(str, Enum):
    NONE = "none"
    SINUSOIDAL = "sinusoidal"
    LEARNABLE = "learnable"


def positional_embedding(
    kind: PositionalKind,
    n: int,
    d: int,
    grid: Optional[Tuple[int, int]] = None,
    rng: Optional[np.random.Generator] = None,
    dtype=None,
) -> Tensor:
    """
    :param kind: PositionalKind, none | sinusoidal | learnable
    :param n: int, tokens
    :param d: int, embedding width, even for sinusoidal
    :param grid: Optional[Tuple[int, int]], token grid, must hold n tokens
    :param rng: Optional[np.random.Generator], learnable init source, seed 0 if omitted
    :returns: Tensor, [n, d]; learnable tables are trainable state owned by the caller
    """
    kind = PositionalKind(kind)
    dtype = dtype or runtime.dtype
    if grid is not None and grid[0] * grid[1] != n:
        raise DimensionError(f"grid {grid} does not hold {n} tokens")
    if kind is PositionalKind.NONE:
        return np.zeros((n, d), dtype=dtype)
    if kind is PositionalKind.LEARNABLE:
        rng = rng or np.random.default_rng(0)
        return (rng.standard_normal((n, d)) * 0.02).astype(dtype)
    if d % 2:
        raise ArgumentError(f"sinusoidal embedding needs an even width, got {d}")
    positions = np.arange(n)[:, None]
    freqs = 10000.0 ** (np.arange(0, d, 2) / d)
    table = np.empty((n, d))
    table[:, 0::2] = np.sin(positions / freqs)
    table[:, 1::2] = np.cos(positions / freqs)
    return table.astype(dtype)
