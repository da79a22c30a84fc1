"""
Windowed attention density maps.

Saved neighborhood probabilities are scattered back onto the token grid:
every query deposits its probability mass on the keys of its window, so a
head's map shows where it looks. Maps are per (layer, head); nothing is
multiplied across layers.
"""
from __future__ import annotations

from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import structlog

from core.errors import ArgumentError, DimensionError
from core.nbhd import neighbor_table_1d
from core.runtime import runtime
from core.schema import DensityMap, NeighborhoodSpec

logger = structlog.get_logger(__name__)

Tensor = np.ndarray

PGM_MAGIC = b"P5"


def _check_rows(probs: Tensor) -> None:
    sums = probs.sum(axis=-1)
    if sums.size and np.abs(sums - 1.0).max() > 1e-6:
        raise ArgumentError(f"probability rows must sum to 1, worst row sums to {sums.flat[np.abs(sums - 1.0).argmax()]}")


def _chunks(count: int):
    return np.array_split(np.arange(count), max(1, min(runtime.threads, count)))


def _scatter_windows(probs: Tensor, spec: NeighborhoodSpec) -> Tensor:
    height, width, window = probs.shape
    if window != spec.k * spec.k:
        raise DimensionError(f"probs carry {window} neighbors per query, k={spec.k} needs {spec.k * spec.k}")
    spec.require_valid(height)
    spec.require_valid(width)
    rows, _ = neighbor_table_1d(height, spec)
    cols, _ = neighbor_table_1d(width, spec)
    blocks = probs.reshape(height, width, spec.k, spec.k)

    def run(chunk: np.ndarray) -> Tensor:
        partial = np.zeros((height, width), dtype=np.float64)
        index = (rows[chunk][:, None, :, None], cols[None, :, None, :])
        np.add.at(partial, index, blocks[chunk])
        return partial

    partials = runtime.map(run, _chunks(height))
    raw = partials[0]
    for partial in partials[1:]:
        raw = raw + partial
    return raw


def _scatter_dense(probs: Tensor, dims: Tuple[int, int]) -> Tensor:
    height, width = dims
    n = height * width
    if probs.shape != (n, n):
        raise DimensionError(f"dense probs {probs.shape} do not match a {height}x{width} grid")
    partials = runtime.map(lambda chunk: probs[chunk].sum(axis=0), _chunks(n))
    raw = partials[0]
    for partial in partials[1:]:
        raw = raw + partial
    return raw.reshape(height, width)


def raw_density(
    probs: Tensor,
    spec: Optional[NeighborhoodSpec] = None,
    dims: Optional[Tuple[int, int]] = None,
) -> Tensor:
    """
    Probability mass received by every key, before normalization.
    The total equals the number of queries.

    :param probs: Tensor, [H, W, k²] for a windowed head, [n, n] for a dense head
    :param spec: Optional[NeighborhoodSpec], the head's window; None for dense
    :param dims: Optional[Tuple[int, int]], grid of a dense head
    :returns: Tensor, [H, W] float64
    :raises ArgumentError: if a probability row does not sum to 1 ± 1e-6
    :raises DimensionError: on a shape mismatch
    """
    probs = np.asarray(probs, dtype=np.float64)
    if spec is None:
        if dims is None or probs.ndim != 2:
            raise DimensionError(f"dense probs need [n, n] and grid dims, got {probs.shape} and {dims}")
        _check_rows(probs)
        return _scatter_dense(probs, dims)
    if probs.ndim != 3:
        raise DimensionError(f"windowed probs must be [H, W, k²], got {probs.shape}")
    _check_rows(probs)
    return _scatter_windows(probs, spec)


def accumulate_density(
    probs: Tensor,
    spec: Optional[NeighborhoodSpec] = None,
    dims: Optional[Tuple[int, int]] = None,
    layer: int = 0,
    head: int = 0,
) -> DensityMap:
    """
    raw_density scaled so its maximum is 1; an all-zero map stays zero
    """
    raw = raw_density(probs, spec, dims)
    peak = raw.max() if raw.size else 0.0
    values = np.clip(raw / peak, 0.0, 1.0) if peak > 0 else np.zeros_like(raw)
    return DensityMap(values=values, layer=layer, head=head)


def write_pgm(density: DensityMap, path: Union[str, Path]) -> None:
    """
    8-bit binary PGM: header "P5\\n<W> <H>\\n255\\n", then row-major bytes
    floor(255·v + 0.5)

    :raises OSError: if the file cannot be written
    """
    height, width = density.shape
    header = b"%s\n%d %d\n255\n" % (PGM_MAGIC, width, height)
    pixels = np.floor(255.0 * density.values + 0.5).astype(np.uint8)
    Path(path).write_bytes(header + pixels.tobytes())
    logger.debug("pgm_written", path=str(path), layer=density.layer, head=density.head)


def read_pgm(path: Union[str, Path]) -> Tensor:
    """
    :returns: Tensor, [H, W] uint8
    :raises ArgumentError: if the file is not an 8-bit P5 image
    """
    data = Path(path).read_bytes()
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        end = pos
        while end < len(data) and not data[end:end + 1].isspace():
            end += 1
        if end == pos:
            raise ArgumentError(f"{path}: truncated PGM header")
        fields.append(data[pos:end])
        pos = end
    pos += 1

    magic, width, height, maxval = fields
    if magic != PGM_MAGIC or maxval != b"255":
        raise ArgumentError(f"{path}: expected an 8-bit P5 image, got {magic!r} maxval {maxval!r}")
    width, height = int(width), int(height)
    pixels = np.frombuffer(data[pos:], dtype=np.uint8)
    if pixels.size != width * height:
        raise ArgumentError(f"{path}: {pixels.size} pixels for a {width}x{height} image")
    return pixels.reshape(height, width)


__all__ = [
    'accumulate_density',
    'raw_density',
    'read_pgm',
    'write_pgm',
]
