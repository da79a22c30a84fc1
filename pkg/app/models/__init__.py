"""
Compact Hydra-NA classifier trained by the toytrain command

image -> conv tokenizer -> + positional table
      -> residual blocks (Hydra-NA, then a ReLU feed-forward)
      -> SeqPool -> linear head
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog

from core.attention import AttentionGrads, AttentionParams, AttentionState, attention_vjp, hydra_forward_2d
from core.embed import (
    PositionalKind,
    SeqPoolWeights,
    TokenizerState,
    conv_tokenize_forward,
    conv_tokenize_vjp,
    init_tokenizer_weights,
    positional_embedding,
    seqpool_forward,
    seqpool_vjp,
)
from core.errors import ArgumentError, DimensionError
from core.runtime import runtime
from core.schema import HydraConfig, TokenizerConfig
from core.tensor import accuracy, cross_entropy, cross_entropy_vjp, relu

logger = structlog.get_logger(__name__)


@dataclass(eq=False)
class FeedForward:
    """Two-layer ReLU feed-forward sublayer, x <- x + relu(x w1 + b1) w2 + b2"""
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @classmethod
    def init(cls, d_model: int, hidden: int, rng: np.random.Generator, dtype) -> "FeedForward":
        return cls(
            w1=(rng.standard_normal((d_model, hidden)) * d_model ** -0.5).astype(dtype),
            b1=np.zeros(hidden, dtype=dtype),
            w2=(rng.standard_normal((hidden, d_model)) * 0.1 * max(hidden, 1) ** -0.5).astype(dtype),
            b2=np.zeros(d_model, dtype=dtype),
        )

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """:returns: (residual branch output, pre-activation)"""
        pre = x @ self.w1 + self.b1
        return relu(pre) @ self.w2 + self.b2, pre

    def vjp(self, x: np.ndarray, pre: np.ndarray, dy: np.ndarray) -> Tuple[np.ndarray, "FeedForward"]:
        """:returns: (dx, parameter gradients packed as a FeedForward)"""
        d_model, hidden = self.w1.shape
        hidden_act = relu(pre).reshape(-1, hidden)
        dy_flat = dy.reshape(-1, d_model)
        dpre = np.where(pre > 0, dy @ self.w2.T, 0.0)
        dpre_flat = dpre.reshape(-1, hidden)
        grads = FeedForward(
            w1=x.reshape(-1, d_model).T @ dpre_flat,
            b1=dpre_flat.sum(axis=0),
            w2=hidden_act.T @ dy_flat,
            b2=dy_flat.sum(axis=0),
        )
        return dpre @ self.w1.T, grads

    def apply_update(self, grads: "FeedForward", lr: float) -> None:
        self.w1 -= lr * grads.w1
        self.b1 -= lr * grads.b1
        self.w2 -= lr * grads.w2
        self.b2 -= lr * grads.b2


@dataclass(eq=False)
class ForwardCache:
    """Everything backward needs from one forward pass"""
    tokenizer: TokenizerState
    blocks: List[AttentionState] = field(default_factory=list)
    # (input, pre-activation) of every feed-forward sublayer
    feed_forward: List[Tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    sequence: Optional[np.ndarray] = None
    pool_weights: Optional[np.ndarray] = None
    pooled: Optional[np.ndarray] = None


@dataclass(eq=False)
class ClassifierGrads:
    kernels: List[np.ndarray]
    positional: np.ndarray
    blocks: List[AttentionGrads]
    feed_forward: List[FeedForward]
    pool_g: np.ndarray
    head_w: np.ndarray
    head_b: np.ndarray


class HydraClassifier:
    """
    Hydra-NA image classifier with hand-wired forward and backward passes.

    Each block is x <- x + hydra(x), then the feed-forward sublayer. The
    linear head starts at zero, so the initial loss is ln(classes).
    """

    def __init__(
        self,
        tokenizer: TokenizerConfig,
        hydra: HydraConfig,
        image_size: Tuple[int, int],
        n_blocks: int = 2,
        mlp_ratio: int = 2,
        classes: int = 2,
        positional: PositionalKind = PositionalKind.SINUSOIDAL,
        rng: Optional[np.random.Generator] = None,
        dtype=None,
    ):
        if n_blocks < 0:
            raise ArgumentError(f"n_blocks must be >= 0, got {n_blocks}")
        if mlp_ratio < 1:
            raise ArgumentError(f"mlp_ratio must be >= 1, got {mlp_ratio}")
        if classes < 2:
            raise ArgumentError(f"need at least 2 classes, got {classes}")
        self.dtype = dtype or runtime.dtype
        rng = rng or np.random.default_rng(0)

        self.tokenizer = tokenizer
        self.hydra = hydra
        self.grid = tokenizer.output_grid(*image_size)
        if self.grid == (0, 0):
            raise DimensionError(f"image {image_size} is smaller than the tokenizer minimum {tokenizer.min_size()}")
        d_model = tokenizer.embed_dim
        hydra.validate(hydra.heads, self.grid)
        if d_model % hydra.heads:
            raise ArgumentError(f"embedding width {d_model} is not divisible by {hydra.heads} heads")

        self.positional_kind = PositionalKind(positional)
        n_tokens = self.grid[0] * self.grid[1]
        self.kernels = init_tokenizer_weights(tokenizer, rng, self.dtype)
        self.positional = positional_embedding(self.positional_kind, n_tokens, d_model, self.grid, rng, self.dtype)
        self.blocks = [
            AttentionParams.init(d_model, hydra, rng, out_std=0.1 * d_model ** -0.5, dtype=self.dtype)
            for _ in range(n_blocks)
        ]
        self.feed_forward = [
            FeedForward.init(d_model, mlp_ratio * d_model, rng, self.dtype) for _ in range(n_blocks)
        ]
        self.pool = SeqPoolWeights.zeros(d_model, self.dtype)
        self.head_w = np.zeros((d_model, classes), dtype=self.dtype)
        self.head_b = np.zeros(classes, dtype=self.dtype)

    @property
    def d_model(self) -> int:
        return self.tokenizer.embed_dim

    def forward(self, images: np.ndarray) -> Tuple[np.ndarray, ForwardCache]:
        """
        :param images: np.ndarray, [B, C, H, W]
        :returns: (logits [B, classes], cache)
        """
        tokens, tok_state = conv_tokenize_forward(images, self.tokenizer, self.kernels)
        cache = ForwardCache(tokenizer=tok_state)
        x = tokens + self.positional
        spatial = x.shape[:-2] + self.grid + (self.d_model,)
        for params, ff in zip(self.blocks, self.feed_forward):
            y, state = hydra_forward_2d(x.reshape(spatial), params, self.hydra)
            x = x + y.reshape(x.shape)
            cache.blocks.append(state)
            branch, pre = ff.forward(x)
            cache.feed_forward.append((x, pre))
            x = x + branch

        pooled, weights = seqpool_forward(x, self.pool)
        cache.sequence, cache.pool_weights, cache.pooled = x, weights, pooled
        return pooled @ self.head_w + self.head_b, cache

    def backward(self, cache: ForwardCache, dlogits: np.ndarray) -> ClassifierGrads:
        head_w = cache.pooled.T @ dlogits
        head_b = dlogits.sum(axis=0)
        dpooled = dlogits @ self.head_w.T
        dx, dg, _ = seqpool_vjp(cache.sequence, self.pool, cache.pool_weights, dpooled)

        block_grads: List[AttentionGrads] = []
        ff_grads: List[FeedForward] = []
        layers = list(zip(self.blocks, cache.blocks, self.feed_forward, cache.feed_forward))
        for params, state, ff, (ff_in, pre) in reversed(layers):
            dbranch, grads_ff = ff.vjp(ff_in, pre, dx)
            dx = dx + dbranch
            ff_grads.append(grads_ff)
            grads = attention_vjp(state, params, dx.reshape(state.y_shape))
            dx = dx + grads.dx.reshape(dx.shape)
            block_grads.append(grads)

        _, dkernels = conv_tokenize_vjp(cache.tokenizer, dx)
        return ClassifierGrads(
            kernels=dkernels,
            positional=dx.sum(axis=0),
            blocks=block_grads[::-1],
            feed_forward=ff_grads[::-1],
            pool_g=dg,
            head_w=head_w,
            head_b=head_b,
        )

    def apply_update(self, grads: ClassifierGrads, lr: float) -> None:
        """Plain gradient descent; fixed positional tables stay untouched"""
        for kernels, dk in zip(self.kernels, grads.kernels):
            kernels -= lr * dk
        if self.positional_kind is PositionalKind.LEARNABLE:
            self.positional -= lr * grads.positional
        for params, block_grads in zip(self.blocks, grads.blocks):
            params.apply_update(block_grads, lr)
        for ff, grads_ff in zip(self.feed_forward, grads.feed_forward):
            ff.apply_update(grads_ff, lr)
        self.pool.g -= lr * grads.pool_g
        self.head_w -= lr * grads.head_w
        self.head_b -= lr * grads.head_b

    def evaluate(self, images: np.ndarray, labels: Sequence[int]) -> Tuple[float, float]:
        """(mean cross-entropy, accuracy) without touching the parameters"""
        logits, _ = self.forward(images)
        return cross_entropy(logits, labels), accuracy(logits, labels)

    def step(self, images: np.ndarray, labels: Sequence[int], lr: float) -> Tuple[float, float]:
        """
        One full-batch descent step

        :returns: (loss, accuracy) measured before the update
        """
        logits, cache = self.forward(images)
        loss, acc = cross_entropy(logits, labels), accuracy(logits, labels)
        self.apply_update(self.backward(cache, cross_entropy_vjp(logits, labels)), lr)
        return loss, acc

    def attention_maps(self, image: np.ndarray) -> List[AttentionState]:
        """Saved attention state of every block for a single image [C, H, W]"""
        _, cache = self.forward(image[None])
        return cache.blocks
