"""
Neighborhood geometry and head-configuration counting.

Windows clamp (shift) at the borders instead of shrinking, and a dilated
window stays inside the query's dilation class i mod d, so every query
attends to exactly k positions per axis.
"""
from __future__ import annotations

from functools import lru_cache
from typing import Iterator, List, Sequence, Tuple

import numpy as np

from core.errors import ArgumentError
from core.schema import HeadGroup, HydraConfig, NeighborhoodSpec


def _window_start(i: int, length: int, spec: NeighborhoodSpec) -> Tuple[int, int, int]:
    """(dilation class, query rank, first rank of the clamped window)"""
    group = i % spec.d
    group_length = (length - group + spec.d - 1) // spec.d
    rank = (i - group) // spec.d
    start = min(max(rank - spec.k // 2, 0), group_length - spec.k)
    return group, rank, start


def neighbors_1d(i: int, length: int, spec: NeighborhoodSpec) -> List[int]:
    """
    Indices attended by query i along one axis

    :param i: int, query index in [0, length)
    :param length: int, axis length L
    :param spec: NeighborhoodSpec, kernel and dilation
    :returns: List[int], k ascending indices, all congruent to i mod d, containing i
    :raises GeometryError: if L < k·d
    """
    spec.require_valid(length)
    if not 0 <= i < length:
        raise ArgumentError(f"query index {i} outside [0, {length})")
    group, _, start = _window_start(i, length, spec)
    return [group + spec.d * (start + t) for t in range(spec.k)]


def neighbors_2d(
    pos: Tuple[int, int], dims: Tuple[int, int], spec: NeighborhoodSpec
) -> List[Tuple[int, int]]:
    """
    Row-major cartesian product of the per-axis neighborhoods

    :returns: List[Tuple[int, int]], k² coordinates
    """
    rows = neighbors_1d(pos[0], dims[0], spec)
    cols = neighbors_1d(pos[1], dims[1], spec)
    return [(r, c) for r in rows for c in cols]


@lru_cache(maxsize=256)
def _tables(length: int, spec: NeighborhoodSpec) -> Tuple[np.ndarray, np.ndarray]:
    spec.require_valid(length)
    index = np.empty((length, spec.k), dtype=np.int64)
    offset = np.empty((length, spec.k), dtype=np.int64)
    steps = np.arange(spec.k)
    for i in range(length):
        group, rank, start = _window_start(i, length, spec)
        index[i] = group + spec.d * (start + steps)
        offset[i] = start + steps - rank + spec.k - 1
    index.flags.writeable = False
    offset.flags.writeable = False
    return index, offset


def neighbor_table_1d(length: int, spec: NeighborhoodSpec) -> Tuple[np.ndarray, np.ndarray]:
    """
    Vectorized neighborhoods for a whole axis

    :param length: int, axis length L
    :param spec: NeighborhoodSpec, kernel and dilation
    :returns: (index, offset), both [L, k]; index[i] equals neighbors_1d(i, L, spec),
        offset[i] is the relative rank shifted into [0, 2k − 2] for bias lookup
    """
    return _tables(length, spec)


def valid_dilations(resolution: int, k: int) -> int:
    """
    Largest dilation a kernel may take at a resolution

    :param resolution: int, axis length R
    :param k: int, odd kernel with 3 <= k <= R − 1
    :returns: int, floor(R / k)
    """
    if k % 2 == 0 or not 3 <= k <= resolution - 1:
        raise ArgumentError(f"kernel must be odd within [3, {resolution - 1}], got {k}")
    return resolution // k


def _require_even(resolution: int) -> None:
    if resolution < 4 or resolution % 2:
        raise ArgumentError(f"resolution must be even and >= 4, got {resolution}")


def count_head_configs(resolution: int) -> int:
    """
    N_c = sum over i = 1 .. R/2 − 1 of floor(R / (2i + 1))

    :param resolution: int, even R >= 4
    :returns: int, legal (kernel, dilation) pairs for one head
    """
    _require_even(resolution)
    return sum(resolution // (2 * i + 1) for i in range(1, resolution // 2))


def count_head_configs_simplified(resolution: int) -> int:
    """R/4 + sum over i = 1 .. R/4 − 1 of floor(R / (2i + 1)), R divisible by 4"""
    _require_even(resolution)
    if resolution % 4:
        raise ArgumentError(f"simplified count needs R divisible by 4, got {resolution}")
    return resolution // 4 + sum(resolution // (2 * i + 1) for i in range(1, resolution // 4))


def iter_head_configs(resolution: int) -> Iterator[NeighborhoodSpec]:
    """Every legal (k, d), kernel ascending then dilation ascending"""
    _require_even(resolution)
    for k in range(3, resolution, 2):
        for d in range(1, valid_dilations(resolution, k) + 1):
            yield NeighborhoodSpec(k, d)


def count_arch_configs(layout: Sequence[Tuple[int, int]], transformers_per_level: int) -> int:
    """
    Total head configurations of a multi-level architecture

    :param layout: Sequence[Tuple[int, int]], (heads, resolution) per level
    :param transformers_per_level: int, transformer blocks sharing each level
    :returns: int, transformers_per_level × Σ heads × N_c(resolution)
    """
    if not layout:
        raise ArgumentError("layout must contain at least one level")
    if transformers_per_level < 1:
        raise ArgumentError(f"transformers_per_level must be >= 1, got {transformers_per_level}")
    return transformers_per_level * sum(
        heads * count_head_configs(resolution) for heads, resolution in layout
    )


def split_head_dilation(resolution: int, k: int) -> int:
    """2^floor(log2(R / k)), the largest power-of-two dilation that fits"""
    if resolution < k:
        raise ArgumentError(f"kernel {k} exceeds resolution {resolution}")
    return 1 << ((resolution // k).bit_length() - 1)


def split_head_config(heads: int, resolution: int, k: int = 7) -> HydraConfig:
    """
    Half the heads dense (k, 1), half sparse (k, maximal power-of-two dilation)

    Dense heads come first. With one head, or when the maximal dilation is 1,
    every head is dense.
    """
    sparse = split_head_dilation(resolution, k)
    if heads < 2 or sparse == 1:
        return HydraConfig.uniform(heads, NeighborhoodSpec(k, 1))
    dense_heads = heads - heads // 2
    return HydraConfig((
        HeadGroup(dense_heads, NeighborhoodSpec(k, 1)),
        HeadGroup(heads // 2, NeighborhoodSpec(k, sparse)),
    ))


def progressive_config(heads: int, resolution: int, k: int = 7) -> HydraConfig:
    """
    Dilations 1, 2, 4, ..., up to the maximal power of two, heads spread evenly

    Earlier groups take the remainder when heads do not divide evenly.
    """
    top = split_head_dilation(resolution, k)
    dilations = [1 << p for p in range(top.bit_length())]
    if heads < len(dilations):
        raise ArgumentError(f"{len(dilations)} dilation groups need at least as many heads, got {heads}")
    base, extra = divmod(heads, len(dilations))
    return HydraConfig(tuple(
        HeadGroup(base + (1 if g < extra else 0), NeighborhoodSpec(k, d))
        for g, d in enumerate(dilations)
    ))


@lru_cache(maxsize=256)
def _scatter(length: int, spec: NeighborhoodSpec) -> Tuple[np.ndarray, np.ndarray]:
    index, offset = _tables(length, spec)
    gather = (index[:, :, None] == np.arange(length)).astype(np.float64)
    bias = (offset[:, :, None] == np.arange(2 * spec.k - 1)).astype(np.float64)
    gather.flags.writeable = False
    bias.flags.writeable = False
    return gather, bias


def scatter_tables_1d(length: int, spec: NeighborhoodSpec) -> Tuple[np.ndarray, np.ndarray]:
    """
    One-hot transposes of neighbor_table_1d, used to scatter-add gradients

    :returns: (keys, offsets); keys[i, t, j] = 1 iff neighbor t of query i is j,
        shape [L, k, L]; offsets[i, t, o] = 1 iff its bias offset is o, shape [L, k, 2k − 1]
    """
    return _scatter(length, spec)
