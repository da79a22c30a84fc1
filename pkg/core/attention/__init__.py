"""
Attention kernels: dense multi-head, 2-D neighborhood and Hydra.

y, state = hydra_forward_2d(x, params, HydraConfig.parse("7x1:2,7x32:2"))
grads = attention_vjp(state, params, dy)
"""
from .params import AttentionGrads, AttentionParams, AttentionState
from .kernels import (
    attention_vjp,
    hydra_forward_2d,
    mha_dense,
    mha_dense_forward,
    na_forward_2d,
    na_vjp,
)
from .cost import AttentionKind, flop_mem_estimate

__all__ = [
    'AttentionGrads',
    'AttentionKind',
    'AttentionParams',
    'AttentionState',
    'attention_vjp',
    'flop_mem_estimate',
    'hydra_forward_2d',
    'mha_dense',
    'mha_dense_forward',
    'na_forward_2d',
    'na_vjp',
]
