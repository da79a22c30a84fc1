"""
Dense multi-head attention, 2-D neighborhood attention and Hydra
(per-head-group kernel and dilation) attention, with one shared backward.

Heads run through runtime.map; each head writes only its own channel slice,
so results do not depend on the worker count.
"""
from __future__ import annotations

import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from core.errors import ArgumentError, DimensionError, StaleStateError
from core.nbhd import neighbor_table_1d, scatter_tables_1d
from core.runtime import runtime
from core.schema import HydraConfig, NeighborhoodSpec
from core.tensor import softmax_scaled, softmax_scaled_vjp

from .params import AttentionGrads, AttentionParams, AttentionState

Tensor = np.ndarray


def _head_dim(d_model: int, heads: int) -> int:
    if heads < 1 or d_model % heads:
        raise ArgumentError(f"d_model {d_model} is not divisible by {heads} heads")
    return d_model // heads


def _gather(t: Tensor, spec: NeighborhoodSpec) -> Tensor:
    """[B, H, W, c] -> [B, H, W, k², c], neighbors in row-major window order"""
    batch, height, width, channels = t.shape
    rows, _ = neighbor_table_1d(height, spec)
    cols, _ = neighbor_table_1d(width, spec)
    picked = t[:, rows[:, None, :, None], cols[None, :, None, :]]
    return picked.reshape(batch, height, width, spec.k * spec.k, channels)


def _bias_logits(table: Tensor, height: int, width: int, spec: NeighborhoodSpec) -> Tensor:
    _, row_off = neighbor_table_1d(height, spec)
    _, col_off = neighbor_table_1d(width, spec)
    picked = table[row_off[:, None, :, None], col_off[None, :, None, :]]
    return picked.reshape(height, width, spec.k * spec.k)


def _na_head(q, k, v, spec, table, scale):
    keys = _gather(k, spec)
    values = _gather(v, spec)
    logits = np.matmul(keys, q[..., None])[..., 0]
    if table is not None:
        logits = logits + _bias_logits(table, q.shape[1], q.shape[2], spec)
    probs = softmax_scaled(logits, scale)
    return np.matmul(probs[..., None, :], values)[..., 0, :], probs


def _dense_head(q, k, v, scale):
    probs = softmax_scaled(np.matmul(q, np.swapaxes(k, -1, -2)), scale)
    return np.matmul(probs, v), probs


def _forward(
    kind: str,
    x: Tensor,
    params: AttentionParams,
    specs: Sequence[Optional[NeighborhoodSpec]],
) -> Tuple[Tensor, AttentionState]:
    if not specs:
        raise ArgumentError(f"{kind}: needs at least one head")
    spatial = specs[0] is not None
    core_ndim = 3 if spatial else 2
    if x.ndim < core_ndim or x.shape[-1] != params.d_model:
        raise DimensionError(f"{kind}: input {x.shape} does not match d_model {params.d_model}")
    head_dim = _head_dim(params.d_model, len(specs))
    params.check_bias(specs)
    runtime.check_finite(kind, x, *params.arrays())

    xb = x.reshape((-1,) + x.shape[-core_ndim:])
    q, k, v = xb @ params.w_q, xb @ params.w_k, xb @ params.w_v
    scale = math.sqrt(head_dim)

    def run(h: int):
        sl = slice(h * head_dim, (h + 1) * head_dim)
        if specs[h] is None:
            return _dense_head(q[..., sl], k[..., sl], v[..., sl], scale)
        return _na_head(q[..., sl], k[..., sl], v[..., sl], specs[h], params.bias[h], scale)

    results = runtime.map(run, range(len(specs)))
    concat = np.concatenate([out for out, _ in results], axis=-1)
    y = concat @ params.w_o
    state = AttentionState(
        kind=kind,
        params=params,
        generation=params.generation,
        x=x,
        q=q,
        k=k,
        v=v,
        concat=concat,
        probs=[probs for _, probs in results],
        specs=list(specs),
        y_shape=x.shape,
    )
    return y.reshape(x.shape), state


def mha_dense_forward(x: Tensor, params: AttentionParams, heads: int) -> Tuple[Tensor, AttentionState]:
    """
    Full softmax(Q Kᵀ / sqrt(d_h)) V attention over a token sequence

    :param x: Tensor, [..., n, d_model]
    :param params: AttentionParams, without bias tables
    :param heads: int, must divide d_model
    :returns: (y, state), y shaped like x
    """
    return _forward("dense", x, params, [None] * heads)


def mha_dense(x: Tensor, params: AttentionParams, heads: int) -> Tensor:
    return mha_dense_forward(x, params, heads)[0]


def hydra_forward_2d(
    x: Tensor, params: AttentionParams, config: HydraConfig
) -> Tuple[Tensor, AttentionState]:
    """
    Neighborhood attention where each head group has its own (k, d)

    :param x: Tensor, [..., H, W, d_model]
    :param params: AttentionParams, one bias table per head sized to its group's k
    :param config: HydraConfig, head groups in concatenation order
    :returns: (y, state); state.head_probs(h) is [..., H, W, k_h²]
    :raises GeometryError: if a group's neighborhood does not fit H or W
    """
    if x.ndim < 3:
        raise DimensionError(f"hydra: expected [..., H, W, d_model], got {x.shape}")
    config.validate(config.heads, x.shape[-3:-1])
    return _forward("hydra", x, params, config.head_specs())


def na_forward_2d(
    x: Tensor, params: AttentionParams, heads: int, spec: NeighborhoodSpec
) -> Tuple[Tensor, AttentionState]:
    """
    Neighborhood attention with one (k, d) shared by every head

    :param x: Tensor, [..., H, W, d_model]
    :param params: AttentionParams, one (2k − 1)² bias table per head
    :param heads: int, must divide d_model
    :param spec: NeighborhoodSpec, valid for H and W
    :returns: (y, state)
    """
    y, state = hydra_forward_2d(x, params, HydraConfig.uniform(heads, spec))
    state.kind = "na"
    return y, state


def _dense_head_vjp(q, k, v, probs, dout, scale):
    dprobs = np.matmul(dout, np.swapaxes(v, -1, -2))
    dv = np.matmul(np.swapaxes(probs, -1, -2), dout)
    dlogits = softmax_scaled_vjp(probs, scale, dprobs)
    dq = np.matmul(dlogits, k)
    dk = np.matmul(np.swapaxes(dlogits, -1, -2), q)
    return dq, dk, dv, None


def _na_head_vjp(q, k, v, probs, spec, dout, scale, with_bias):
    batch, height, width, head_dim = q.shape
    keys = _gather(k, spec)
    values = _gather(v, spec)

    dprobs = np.matmul(values, dout[..., None])[..., 0]
    dlogits = softmax_scaled_vjp(probs, scale, dprobs)
    dq = np.matmul(dlogits[..., None, :], keys)[..., 0, :]

    # scatter-add back to key/value positions, the transpose of _gather
    row_keys, row_bias = scatter_tables_1d(height, spec)
    col_keys, col_bias = scatter_tables_1d(width, spec)
    window = (batch, height, width, spec.k, spec.k)
    dkeys = (dlogits[..., None] * q[..., None, :]).reshape(window + (head_dim,))
    dvalues = (probs[..., None] * dout[..., None, :]).reshape(window + (head_dim,))
    dk = np.einsum("bhwaed,har,wec->brcd", dkeys, row_keys, col_keys, optimize=True)
    dv = np.einsum("bhwaed,har,wec->brcd", dvalues, row_keys, col_keys, optimize=True)

    dtable = None
    if with_bias:
        dtable = np.einsum(
            "bhwae,hao,wep->op", dlogits.reshape(window), row_bias, col_bias, optimize=True
        ).astype(q.dtype, copy=False)
    return dq, dk.astype(q.dtype, copy=False), dv.astype(q.dtype, copy=False), dtable


def attention_vjp(state: AttentionState, params: AttentionParams, dy: Tensor) -> AttentionGrads:
    """
    Exact reverse-mode gradients for dense, NA and Hydra forward calls

    :param state: AttentionState, from the matching forward call
    :param params: AttentionParams, the same object, not updated since forward
    :param dy: Tensor, upstream gradient shaped like y
    :returns: AttentionGrads, dx plus one gradient per parameter
    :raises StaleStateError: if state was recorded against other or since-updated params
    """
    if params is not state.params or params.generation != state.generation:
        raise StaleStateError(
            f"saved {state.kind} state is from generation {state.generation}, params are at {params.generation}"
        )
    if dy.shape != state.y_shape:
        raise DimensionError(f"dy shape {dy.shape} differs from forward output {state.y_shape}")

    d_model = params.d_model
    head_dim = state.head_dim
    scale = math.sqrt(head_dim)
    dyb = dy.reshape(state.concat.shape)
    dconcat = dyb @ params.w_o.T
    with_bias = bool(params.bias)

    def run(h: int):
        sl = slice(h * head_dim, (h + 1) * head_dim)
        q, k, v = state.q[..., sl], state.k[..., sl], state.v[..., sl]
        dout = dconcat[..., sl]
        if state.specs[h] is None:
            return _dense_head_vjp(q, k, v, state.probs[h], dout, scale)
        return _na_head_vjp(q, k, v, state.probs[h], state.specs[h], dout, scale, with_bias)

    results = runtime.map(run, range(state.heads))
    dq = np.concatenate([r[0] for r in results], axis=-1).reshape(-1, d_model)
    dk = np.concatenate([r[1] for r in results], axis=-1).reshape(-1, d_model)
    dv = np.concatenate([r[2] for r in results], axis=-1).reshape(-1, d_model)

    x2 = state.x.reshape(-1, d_model)
    dx = dq @ params.w_q.T + dk @ params.w_k.T + dv @ params.w_v.T
    bias: List[Tensor] = [r[3] for r in results] if with_bias else []
    return AttentionGrads(
        dx=dx.reshape(state.x.shape),
        w_q=x2.T @ dq,
        w_k=x2.T @ dk,
        w_v=x2.T @ dv,
        w_o=state.concat.reshape(-1, d_model).T @ dyb.reshape(-1, d_model),
        bias=bias,
    )


na_vjp = attention_vjp
