"""
Randomized VJP certification suites, one per differentiable operation.

Every case draws a small 64-bit instance, scalarizes the output with a
random cotangent r (loss = Σ y·r) and compares the analytic VJP with
finite differences for each input. Instances are kept well conditioned:
logits stay within [-3, 3] and kinks (relu zeros, max-pool ties) are kept
at least 1e-3 away.
"""
from __future__ import annotations

from contextlib import contextmanager
from dataclasses import replace
from typing import Callable, Dict, Iterator, List, Optional, Sequence

import numpy as np
import structlog
from numpy.lib.stride_tricks import sliding_window_view

from core.attention import AttentionParams, attention_vjp, hydra_forward_2d, mha_dense_forward, na_forward_2d
from core.embed import (
    SeqPoolWeights,
    conv_tokenize,
    conv_tokenize_forward,
    conv_tokenize_vjp,
    init_tokenizer_weights,
    patch_tokenize,
    patch_tokenize_vjp,
    seqpool,
    seqpool_forward,
    seqpool_vjp,
)
from core.errors import ArgumentError
from core.schema import ConvBlock, GradReport, HydraConfig, NeighborhoodSpec, PoolSpec, TokenizerConfig
from core.tensor import (
    ElementwiseOp,
    conv2d,
    conv2d_vjp,
    cross_entropy,
    cross_entropy_vjp,
    elementwise,
    elementwise_vjp,
    matmul,
    matmul_vjp,
    maxpool2d,
    maxpool2d_vjp,
    relu,
    softmax_scaled,
    softmax_scaled_vjp,
)

from . import check_gradient

logger = structlog.get_logger(__name__)

_sabotaged = set()


def _tamper(op: str, grad: np.ndarray) -> np.ndarray:
    if op not in _sabotaged:
        return grad
    grad = np.array(grad, dtype=np.float64)
    grad.reshape(-1)[0] += 1e-2 * (1.0 + np.abs(grad).max())
    return grad


class _Case:

    def __init__(self, op: str, eps: float, tolerance: float):
        self.op = op
        self.eps = eps
        self.tolerance = tolerance
        self.reports: List[GradReport] = []

    def check(self, input_name: str, f: Callable[[np.ndarray], float], x: np.ndarray, analytic) -> None:
        self.reports.append(check_gradient(
            f"{self.op}/{input_name}", f, x, _tamper(self.op, analytic), self.eps, self.tolerance
        ))


def _uniform(rng, shape, bound=1.0):
    return rng.uniform(-bound, bound, size=shape)


def _suite_matmul(rng, case):
    m, p, q = (int(v) for v in rng.integers(2, 6, size=3))
    a = _uniform(rng, (2, m, p) if rng.random() < 0.5 else (m, p))
    b = _uniform(rng, (p, q))
    r = rng.standard_normal(matmul(a, b).shape)
    da, db = matmul_vjp(a, b, r)
    case.check("a", lambda t: float((matmul(t, b) * r).sum()), a, da)
    case.check("b", lambda t: float((matmul(a, t) * r).sum()), b, db)


def _suite_softmax(rng, case):
    x = _uniform(rng, (3, int(rng.integers(2, 7))), 3.0)
    scale = float(rng.uniform(0.5, 2.0))
    r = rng.standard_normal(x.shape)
    y = softmax_scaled(x, scale)
    case.check("x", lambda t: float((softmax_scaled(t, scale) * r).sum()), x, softmax_scaled_vjp(y, scale, r))


def _suite_conv2d(rng, case):
    channels, filters = (int(v) for v in rng.integers(1, 4, size=2))
    height, width = (int(v) for v in rng.integers(4, 8, size=2))
    k = int(rng.choice([1, 3]))
    stride, pad = int(rng.integers(1, 3)), int(rng.integers(0, 2))
    x = _uniform(rng, (channels, height, width))
    kernels = _uniform(rng, (filters, channels, k, k))
    r = rng.standard_normal(conv2d(x, kernels, stride, pad).shape)
    dx, dk = conv2d_vjp(x, kernels, stride, pad, r)
    case.check("x", lambda t: float((conv2d(t, kernels, stride, pad) * r).sum()), x, dx)
    case.check("kernels", lambda t: float((conv2d(x, t, stride, pad) * r).sum()), kernels, dk)


def _suite_maxpool2d(rng, case):
    channels = int(rng.integers(1, 3))
    height, width = (int(v) for v in rng.integers(4, 8, size=2))
    k = int(rng.integers(2, 4))
    stride, pad = int(rng.integers(1, 3)), int(rng.integers(0, k // 2 + 1))
    size = channels * height * width
    # distinct values at least 0.09 apart, so no window has a tie
    x = (rng.permutation(size) * 0.1 + rng.uniform(0.0, 0.01, size)).reshape(channels, height, width)
    r = rng.standard_normal(maxpool2d(x, k, stride, pad).shape)
    dx = maxpool2d_vjp(x, k, stride, pad, r)
    case.check("x", lambda t: float((maxpool2d(t, k, stride, pad) * r).sum()), x, dx)


def _suite_relu(rng, case):
    shape = (3, int(rng.integers(2, 7)))
    x = rng.choice([-1.0, 1.0], size=shape) * rng.uniform(0.1, 1.0, size=shape)
    r = rng.standard_normal(shape)
    dx, _ = elementwise_vjp(x, ElementwiseOp.RELU, None, r)
    case.check("x", lambda t: float((elementwise(t, ElementwiseOp.RELU) * r).sum()), x, dx)


def _suite_cross_entropy(rng, case):
    batch, classes = int(rng.integers(1, 6)), int(rng.integers(2, 5))
    logits = _uniform(rng, (batch, classes), 3.0)
    labels = rng.integers(0, classes, size=batch)
    case.check("logits", lambda t: cross_entropy(t, labels), logits, cross_entropy_vjp(logits, labels))


_WEIGHTS = ("w_q", "w_k", "w_v", "w_o")


def _check_attention(case: _Case, forward, x: np.ndarray, params: AttentionParams, rng) -> None:
    y, state = forward(x, params)
    r = rng.standard_normal(y.shape)
    grads = attention_vjp(state, params, r)

    def loss(inputs, p):
        return float((forward(inputs, p)[0] * r).sum())

    case.check("x", lambda t: loss(t, params), x, grads.dx)
    for name in _WEIGHTS:
        case.check(name, lambda t, name=name: loss(x, replace(params, **{name: t})), getattr(params, name), getattr(grads, name))
    for h, table in enumerate(params.bias):
        def with_table(t, h=h):
            bias = list(params.bias)
            bias[h] = t
            return loss(x, replace(params, bias=bias))
        case.check(f"bias{h}", with_table, table, grads.bias[h])


def _suite_mha_dense(rng, case):
    heads = int(rng.integers(1, 3))
    d_model = heads * int(rng.integers(2, 4))
    x = _uniform(rng, (int(rng.integers(2, 7)), d_model))
    params = AttentionParams.init(d_model, heads, rng, std=0.5, dtype=np.float64)
    _check_attention(case, lambda t, p: mha_dense_forward(t, p, heads), x, params, rng)


def _suite_na(rng, case):
    heads = int(rng.integers(1, 3))
    height, width = (int(v) for v in rng.integers(3, 7, size=2))
    k = int(rng.choice([1, 3]))
    d = 2 if 2 * k <= min(height, width) and rng.random() < 0.5 else 1
    spec = NeighborhoodSpec(k, d)
    d_model = 2 * heads
    x = _uniform(rng, (height, width, d_model))
    params = AttentionParams.init(d_model, HydraConfig.uniform(heads, spec), rng, std=0.5, bias_std=0.3, dtype=np.float64)
    _check_attention(case, lambda t, p: na_forward_2d(t, p, heads, spec), x, params, rng)


_HYDRA_LAYOUTS = ("3x1:1,3x2:1", "1x1:1,3x1:1", "3x2:1,5x1:1", "3x1:2,1x1:1")


def _suite_hydra(rng, case):
    config = HydraConfig.parse(str(rng.choice(_HYDRA_LAYOUTS)))
    height, width = (int(v) for v in rng.integers(6, 8, size=2))
    d_model = 2 * config.heads
    x = _uniform(rng, (height, width, d_model))
    params = AttentionParams.init(d_model, config, rng, std=0.5, bias_std=0.3, dtype=np.float64)
    _check_attention(case, lambda t, p: hydra_forward_2d(t, p, config), x, params, rng)


def _tokenizer_margin(image, cfg: TokenizerConfig, weights) -> float:
    """Distance of the instance from relu kinks and max-pool ties"""
    margin = np.inf
    pool = cfg.pool
    x = image
    for block, kernels in zip(cfg.blocks, weights):
        conv = conv2d(x, kernels, block.stride, block.pad)
        margin = min(margin, float(np.abs(conv).min()))
        act = relu(conv)
        widths = ((0, 0), (pool.pad, pool.pad), (pool.pad, pool.pad))
        padded = np.pad(act, widths, constant_values=-np.inf)
        windows = sliding_window_view(padded, (pool.kernel, pool.kernel), axis=(-2, -1))[:, ::pool.stride, ::pool.stride]
        top = np.sort(windows.reshape(windows.shape[:3] + (-1,)), axis=-1)[..., -2:]
        live = top[..., 1] > 0
        if live.any():
            margin = min(margin, float((top[..., 1] - top[..., 0])[live].min()))
        x = maxpool2d(act, pool.kernel, pool.stride, pool.pad)
    return margin


def _suite_conv_tokenize(rng, case):
    n_blocks = int(rng.integers(1, 3))
    pool = PoolSpec(3, 2, 1) if rng.random() < 0.5 else PoolSpec(2, 2, 0)
    cfg = TokenizerConfig(2, tuple(ConvBlock(3, 3, 1, 1) for _ in range(n_blocks)), pool)
    side = max(cfg.min_size(), 6)
    for _ in range(200):
        height, width = (int(v) for v in rng.integers(side, side + 3, size=2))
        image = _uniform(rng, (2, height, width))
        weights = init_tokenizer_weights(cfg, rng, dtype=np.float64)
        if _tokenizer_margin(image, cfg, weights) > 1e-3:
            break
    else:
        raise RuntimeError("could not draw a well-conditioned tokenizer instance")

    tokens, state = conv_tokenize_forward(image, cfg, weights)
    r = rng.standard_normal(tokens.shape)
    dimage, dkernels = conv_tokenize_vjp(state, r)
    case.check("image", lambda t: float((conv_tokenize(t, cfg, weights) * r).sum()), image, dimage)
    for i, kernels in enumerate(weights):
        def with_kernels(t, i=i):
            swapped = list(weights)
            swapped[i] = t
            return float((conv_tokenize(image, cfg, swapped) * r).sum())
        case.check(f"kernels{i}", with_kernels, kernels, dkernels[i])


def _suite_seqpool(rng, case):
    x = _uniform(rng, (2, int(rng.integers(1, 6)), int(rng.integers(2, 5))))
    weights = SeqPoolWeights(rng.standard_normal(x.shape[-1]) * 0.5, float(rng.uniform(-1, 1)))
    pooled, attn = seqpool_forward(x, weights)
    r = rng.standard_normal(pooled.shape)
    dx, dg, _ = seqpool_vjp(x, weights, attn, r)
    case.check("x", lambda t: float((seqpool(t, weights) * r).sum()), x, dx)
    case.check("g", lambda t: float((seqpool(x, replace(weights, g=t)) * r).sum()), weights.g, dg)


def _suite_patch_tokenize(rng, case):
    channels, patch = int(rng.integers(1, 3)), int(rng.integers(1, 4))
    rows, cols = (int(v) for v in rng.integers(1, 4, size=2))
    image = _uniform(rng, (channels, rows * patch, cols * patch))
    projection = _uniform(rng, (channels * patch * patch, 3))
    r = rng.standard_normal((rows * cols, 3))
    dimage, dprojection = patch_tokenize_vjp(image, patch, projection, r)
    case.check("image", lambda t: float((patch_tokenize(t, patch, projection) * r).sum()), image, dimage)
    case.check("projection", lambda t: float((patch_tokenize(image, patch, t) * r).sum()), projection, dprojection)


SUITES: Dict[str, Callable] = {
    "matmul": _suite_matmul,
    "softmax_scaled": _suite_softmax,
    "conv2d": _suite_conv2d,
    "maxpool2d": _suite_maxpool2d,
    "relu": _suite_relu,
    "cross_entropy": _suite_cross_entropy,
    "mha_dense": _suite_mha_dense,
    "na_forward_2d": _suite_na,
    "hydra_forward_2d": _suite_hydra,
    "conv_tokenize": _suite_conv_tokenize,
    "patch_tokenize": _suite_patch_tokenize,
    "seqpool": _suite_seqpool,
}


@contextmanager
def sabotage(op: str) -> Iterator[None]:
    """
    Perturb one op's analytic gradients while active; a negative control
    proving the suites can fail.
    """
    if op not in SUITES:
        raise ArgumentError(f"unknown op '{op}', expected one of {sorted(SUITES)}")
    _sabotaged.add(op)
    try:
        yield
    finally:
        _sabotaged.discard(op)


def run_suite(op: str, seed: int, cases: int, eps: float = 1e-5, tolerance: float = 1e-5) -> List[GradReport]:
    """
    :param op: str, key of SUITES
    :param seed: int, base seed; each op draws from its own stream
    :param cases: int, random instances
    :returns: List[GradReport], one per (instance, input)
    """
    if op not in SUITES:
        raise ArgumentError(f"unknown op '{op}', expected one of {sorted(SUITES)}")
    rng = np.random.default_rng([seed, list(SUITES).index(op)])
    case = _Case(op, eps, tolerance)
    for _ in range(cases):
        SUITES[op](rng, case)
    return case.reports


def run_suites(
    seed: int,
    cases: int,
    eps: float = 1e-5,
    tolerance: float = 1e-5,
    ops: Optional[Sequence[str]] = None,
) -> Dict[str, GradReport]:
    """
    Worst report per op; with zero cases every op passes trivially
    """
    worst: Dict[str, GradReport] = {}
    for op in ops or list(SUITES):
        reports = run_suite(op, seed, cases, eps, tolerance)
        worst[op] = max(reports, key=lambda r: r.max_rel_error, default=GradReport(op, 0.0, (), tolerance))
        logger.debug("gradcheck_op", op=op, cases=cases, max_rel_error=worst[op].max_rel_error)
    return worst
