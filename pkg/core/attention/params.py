from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from core.errors import ArgumentError, DimensionError
from core.runtime import runtime
from core.schema import HydraConfig, NeighborhoodSpec


@dataclass(eq=False)
class AttentionParams:
    """
    Projection matrices plus one relative-bias table per head

    - w_q, w_k, w_v, w_o: [d_model, d_model]
    - bias: per head (2k − 1) x (2k − 1) tables, empty for dense attention
    - generation: bumped by every in-place update
    """
    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    w_o: np.ndarray
    bias: List[np.ndarray] = field(default_factory=list)
    generation: int = 0

    def __post_init__(self):
        d_model = self.w_q.shape[0]
        for name in ("w_q", "w_k", "w_v", "w_o"):
            if getattr(self, name).shape != (d_model, d_model):
                raise DimensionError(f"{name} must be {d_model}x{d_model}, got {getattr(self, name).shape}")

    @property
    def d_model(self) -> int:
        return self.w_q.shape[0]

    @classmethod
    def init(
        cls,
        d_model: int,
        layout: Union[int, HydraConfig],
        rng: np.random.Generator,
        std: Optional[float] = None,
        out_std: Optional[float] = None,
        bias_std: float = 0.0,
        dtype=None,
    ) -> "AttentionParams":
        """
        Seeded normal initialization

        :param d_model: int, model width
        :param layout: int for dense heads without bias, HydraConfig for NA heads
        :param rng: np.random.Generator, source of randomness
        :param std: Optional[float], projection std, defaults to 1/sqrt(d_model)
        :param out_std: Optional[float], W_O std, defaults to std
        :param bias_std: float, bias table std, 0 gives zero tables
        :param dtype: numpy dtype, defaults to the runtime precision
        """
        dtype = dtype or runtime.dtype
        std = d_model ** -0.5 if std is None else std
        out_std = std if out_std is None else out_std

        def draw(shape, scale):
            return (rng.standard_normal(shape) * scale).astype(dtype)

        w_q, w_k, w_v = (draw((d_model, d_model), std) for _ in range(3))
        w_o = draw((d_model, d_model), out_std)
        bias = []
        if isinstance(layout, HydraConfig):
            bias = [draw((2 * s.k - 1, 2 * s.k - 1), bias_std) for s in layout.head_specs()]
        return cls(w_q, w_k, w_v, w_o, bias)

    def check_bias(self, specs: Sequence[Optional[NeighborhoodSpec]]) -> None:
        """
        :param specs: Sequence, per-head spec, None for dense heads
        :raises ArgumentError: if bias tables and heads disagree
        """
        if all(s is None for s in specs):
            if self.bias:
                raise ArgumentError("dense attention takes no bias tables")
            return
        if len(self.bias) != len(specs):
            raise ArgumentError(f"{len(self.bias)} bias tables for {len(specs)} heads")
        for h, (table, spec) in enumerate(zip(self.bias, specs)):
            extent = 2 * spec.k - 1
            if table.shape != (extent, extent):
                raise DimensionError(f"head {h}: bias table {table.shape} does not match k={spec.k}")

    def arrays(self) -> List[np.ndarray]:
        return [self.w_q, self.w_k, self.w_v, self.w_o, *self.bias]

    def apply_update(self, grads: "AttentionGrads", lr: float) -> None:
        """Gradient descent step in place"""
        for param, grad in zip(self.arrays(), grads.arrays()):
            param -= lr * grad
        self.generation += 1


@dataclass(eq=False)
class AttentionGrads:
    """Reverse-mode gradients of one attention layer"""
    dx: np.ndarray
    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    w_o: np.ndarray
    bias: List[np.ndarray] = field(default_factory=list)

    def arrays(self) -> List[np.ndarray]:
        return [self.w_q, self.w_k, self.w_v, self.w_o, *self.bias]


@dataclass(eq=False)
class AttentionState:
    """
    What a forward call keeps for the matching backward call

    q, k, v and concat are batch-flattened: [B, H, W, d_model] for
    neighborhood kinds, [B, n, d_model] for dense.
    """
    kind: str
    params: AttentionParams
    generation: int
    x: np.ndarray
    q: np.ndarray
    k: np.ndarray
    v: np.ndarray
    concat: np.ndarray
    probs: List[np.ndarray]
    specs: List[Optional[NeighborhoodSpec]]
    y_shape: Tuple[int, ...]

    @property
    def heads(self) -> int:
        return len(self.specs)

    @property
    def head_dim(self) -> int:
        return self.q.shape[-1] // self.heads

    def head_probs(self, h: int) -> np.ndarray:
        """Head h probabilities with the caller's leading axes restored"""
        lead = self.x.shape[:-3] if self.specs[h] is not None else self.x.shape[:-2]
        return self.probs[h].reshape(lead + self.probs[h].shape[1:])
