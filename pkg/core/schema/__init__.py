from __future__ import annotations

import re
from dataclasses import dataclass, asdict
from typing import List, Tuple

import numpy as np

from core.errors import ArgumentError, DimensionError, GeometryError


@dataclass(frozen=True)
class NeighborhoodSpec:
    """
    Square receptive field of one attention head

    - k: odd tokens per axis
    - d: dilation, stride between attended tokens
    """
    k: int
    d: int = 1

    def __post_init__(self):
        if self.k < 1 or self.k % 2 == 0:
            raise GeometryError(f"kernel must be odd and >= 1, got k={self.k}")
        if self.d < 1:
            raise GeometryError(f"dilation must be >= 1, got d={self.d}")

    @property
    def span(self) -> int:
        """Extent covered along one axis, k·d"""
        return self.k * self.d

    def is_valid_for(self, length: int) -> bool:
        return length >= self.k * self.d

    def require_valid(self, length: int) -> None:
        """
        :param length: int, axis length L
        :raises GeometryError: if every dilation class cannot hold k positions
        """
        if not self.is_valid_for(length):
            raise GeometryError(
                f"neighborhood k={self.k}, d={self.d} needs L >= {self.k * self.d}, got L={length}"
            )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class HeadGroup:
    """Consecutive heads sharing one neighborhood"""
    heads: int
    spec: NeighborhoodSpec

    def __post_init__(self):
        if self.heads < 1:
            raise ArgumentError(f"head group needs at least one head, got {self.heads}")


_GROUP_PATTERN = re.compile(r"^\s*(\d+)\s*x\s*(\d+)\s*:\s*(\d+)\s*$")


@dataclass(frozen=True)
class HydraConfig:
    """
    Ordered partition of a layer's heads into neighborhood groups

    Partition order is the channel order of the concatenated head outputs.
    """
    partitions: Tuple[HeadGroup, ...]

    def __post_init__(self):
        if not self.partitions:
            raise ArgumentError("HydraConfig needs at least one partition")

    @classmethod
    def uniform(cls, heads: int, spec: NeighborhoodSpec) -> "HydraConfig":
        return cls((HeadGroup(heads, spec),))

    @classmethod
    def parse(cls, text: str) -> "HydraConfig":
        """
        Parse comma separated KxD:HEADS groups, e.g. '7x1:2,7x32:2'

        :param text: str, group spec
        :returns: HydraConfig, parsed config
        :raises ArgumentError: if any group is malformed
        """
        groups = []
        for chunk in text.split(","):
            match = _GROUP_PATTERN.match(chunk)
            if match is None:
                raise ArgumentError(f"malformed head group '{chunk}', expected KxD:HEADS")
            k, d, heads = (int(v) for v in match.groups())
            groups.append(HeadGroup(heads, NeighborhoodSpec(k, d)))
        return cls(tuple(groups))

    @property
    def heads(self) -> int:
        return sum(group.heads for group in self.partitions)

    def head_specs(self) -> List[NeighborhoodSpec]:
        """One spec per head, in concatenation order"""
        return [group.spec for group in self.partitions for _ in range(group.heads)]

    def validate(self, heads: int, dims: Tuple[int, int]) -> None:
        """
        :param heads: int, total heads of the layer
        :param dims: Tuple[int, int], feature-map extents (H, W)
        :raises ArgumentError: if partition head counts do not sum to heads
        :raises GeometryError: if any spec does not fit H or W
        """
        if self.heads != heads:
            raise ArgumentError(f"partitions cover {self.heads} heads, layer has {heads}")
        for group in self.partitions:
            for length in dims:
                group.spec.require_valid(length)

    def format(self) -> str:
        return ",".join(f"{g.spec.k}x{g.spec.d}:{g.heads}" for g in self.partitions)


@dataclass(frozen=True)
class ConvBlock:
    filters: int
    kernel: int
    stride: int = 1
    pad: int = 0


@dataclass(frozen=True)
class PoolSpec:
    kernel: int
    stride: int
    pad: int = 0


def conv_out_extent(length: int, kernel: int, stride: int, pad: int) -> int:
    """floor((L + 2·pad − k) / stride) + 1, or 0 when the window does not fit"""
    if kernel > length + 2 * pad:
        return 0
    return (length + 2 * pad - kernel) // stride + 1


@dataclass(frozen=True)
class TokenizerConfig:
    """
    Convolutional tokenizer: each block is conv -> relu -> maxpool

    The last block's filter count is the transformer embedding dimension.
    """
    in_channels: int
    blocks: Tuple[ConvBlock, ...]
    pool: PoolSpec

    def __post_init__(self):
        if not self.blocks:
            raise ArgumentError("tokenizer needs at least one conv block")

    @classmethod
    def cct(cls, in_channels: int, embed_dim: int, n_blocks: int = 1) -> "TokenizerConfig":
        """
        Standard compact tokenizer: 3x3 conv stride 1 pad 1, pool 3/2/1

        :param in_channels: int, image channels
        :param embed_dim: int, filters of every block
        :param n_blocks: int, number of conv blocks
        """
        blocks = tuple(ConvBlock(embed_dim, 3, 1, 1) for _ in range(n_blocks))
        return cls(in_channels, blocks, PoolSpec(3, 2, 1))

    @property
    def embed_dim(self) -> int:
        return self.blocks[-1].filters

    def output_grid(self, height: int, width: int) -> Tuple[int, int]:
        """Token grid (H', W') for an input image, (0, 0) if some stage does not fit"""
        for block in self.blocks:
            height = conv_out_extent(height, block.kernel, block.stride, block.pad)
            width = conv_out_extent(width, block.kernel, block.stride, block.pad)
            height = conv_out_extent(height, self.pool.kernel, self.pool.stride, self.pool.pad)
            width = conv_out_extent(width, self.pool.kernel, self.pool.stride, self.pool.pad)
            if height < 1 or width < 1:
                return 0, 0
        return height, width

    def min_size(self) -> int:
        """Smallest square side every stage accepts"""
        side = 1
        while self.output_grid(side, side)[0] < 1:
            side += 1
        return side

    def weight_shapes(self) -> List[Tuple[int, int, int, int]]:
        shapes = []
        channels = self.in_channels
        for block in self.blocks:
            shapes.append((block.filters, channels, block.kernel, block.kernel))
            channels = block.filters
        return shapes


@dataclass
class GaussianMoments:
    """
    Mean vector and covariance of a feature distribution
    """
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        self.mu = np.atleast_1d(np.asarray(self.mu, dtype=np.float64))
        self.sigma = np.atleast_2d(np.asarray(self.sigma, dtype=np.float64))
        m = self.mu.shape[0]
        if self.mu.ndim != 1 or self.sigma.shape != (m, m):
            raise DimensionError(f"mu {self.mu.shape} and sigma {self.sigma.shape} disagree")
        if not np.allclose(self.sigma, self.sigma.T, rtol=0, atol=1e-9):
            raise ArgumentError("covariance is not symmetric within 1e-9")
        if np.linalg.eigvalsh(self.sigma).min() < -1e-9:
            raise ArgumentError("covariance is not positive semi-definite")

    @property
    def dim(self) -> int:
        return self.mu.shape[0]


@dataclass
class DensityMap:
    """
    Per-head attention density on the token grid, values in [0, 1]

    - layer: block index within the model
    - head: head index within the layer
    """
    values: np.ndarray
    layer: int = 0
    head: int = 0

    def __post_init__(self):
        if self.values.ndim != 2:
            raise DimensionError(f"density map must be 2-D, got shape {self.values.shape}")
        if self.values.size and (self.values.min() < 0.0 or self.values.max() > 1.0):
            raise ArgumentError("density values must lie in [0, 1]")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape


@dataclass
class GradReport:
    """
    Outcome of comparing an analytic gradient with finite differences
    """
    name: str
    max_rel_error: float
    worst_index: Tuple[int, ...]
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance

    def to_dict(self) -> dict:
        d = asdict(self)
        d["worst_index"] = list(self.worst_index)
        d["passed"] = self.passed
        return d


@dataclass(frozen=True)
class CostEstimate:
    """Closed-form attention layer cost"""
    macs: int
    attn_state: int
