"""
Closed-form cost of one attention layer

Projections (Q, K, V, O) cost 4·n·d_model² multiply-accumulates for every
kind. Attention state is the number of probabilities kept for backward.
"""
from __future__ import annotations

from enum import Enum
from typing import Optional, Tuple

from core.errors import ArgumentError
from core.schema import CostEstimate, HydraConfig, NeighborhoodSpec


class AttentionKind(str, Enum):
    DENSE = "dense"
    NA = "na"
    HYDRA = "hydra"


def flop_mem_estimate(
    kind: AttentionKind,
    dims: Tuple[int, int],
    d_model: int,
    heads: Optional[int] = None,
    spec: Optional[NeighborhoodSpec] = None,
    config: Optional[HydraConfig] = None,
) -> CostEstimate:
    """
    :param kind: AttentionKind, dense | na | hydra
    :param dims: Tuple[int, int], token grid (H, W); dense uses n = H·W tokens
    :param d_model: int, model width
    :param heads: Optional[int], required for dense and na, checked against config for hydra
    :param spec: Optional[NeighborhoodSpec], required for na
    :param config: Optional[HydraConfig], required for hydra
    :returns: CostEstimate, (multiply-accumulates, attention-state scalars)
    """
    kind = AttentionKind(kind)
    n = dims[0] * dims[1]
    if kind is AttentionKind.HYDRA:
        if config is None:
            raise ArgumentError("hydra estimate needs a HydraConfig")
        heads = config.heads if heads is None else heads
    elif kind is AttentionKind.NA and spec is None:
        raise ArgumentError("na estimate needs a NeighborhoodSpec")
    if not heads or heads < 1 or d_model % heads:
        raise ArgumentError(f"d_model {d_model} is not divisible by heads {heads}")
    head_dim = d_model // heads
    if kind is AttentionKind.NA:
        config = HydraConfig.uniform(heads, spec)

    macs = 4 * n * d_model * d_model
    if kind is AttentionKind.DENSE:
        return CostEstimate(macs=macs + 2 * n * n * d_model, attn_state=heads * n * n)

    config.validate(heads, dims)
    state = sum(g.heads * n * g.spec.k ** 2 for g in config.partitions)
    return CostEstimate(macs=macs + 2 * state * head_dim, attn_state=state)
