"""
Finite-difference oracle for analytic vector-Jacobian products.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from core.errors import ArgumentError, DimensionError, NonFiniteError
from core.runtime import runtime
from core.schema import GradReport

Tensor = np.ndarray


def finite_diff_grad(f: Callable[[Tensor], float], x: Tensor, eps: float = 1e-5) -> Tensor:
    """
    Central differences (f(x + εe) − f(x − εe)) / 2ε for every coordinate

    f receives a probe array that is mutated between calls, so it must not
    keep a reference to it. Coordinate chunks run through runtime.map, each
    chunk with its own probe.

    :param f: Callable, scalar function of an array shaped like x
    :param x: Tensor, evaluation point
    :param eps: float, positive step
    :returns: Tensor, gradient shaped like x
    :raises NonFiniteError: if any evaluation is not finite
    """
    if not eps > 0:
        raise ArgumentError(f"eps must be positive, got {eps}")
    x = np.asarray(x)
    chunks = np.array_split(np.arange(x.size), max(1, min(runtime.threads, x.size)))

    def run(chunk: np.ndarray) -> np.ndarray:
        probe = x.copy()
        flat = probe.reshape(-1)
        out = np.empty(chunk.shape[0])
        for j, i in enumerate(chunk):
            original = flat[i]
            flat[i] = original + eps
            f_plus = f(probe)
            flat[i] = original - eps
            f_minus = f(probe)
            flat[i] = original
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise NonFiniteError(f"f is not finite around coordinate {np.unravel_index(i, x.shape)}")
            out[j] = (f_plus - f_minus) / (2.0 * eps)
        return out

    return np.concatenate(runtime.map(run, chunks)).reshape(x.shape)


def rel_error(a: Tensor, b: Tensor) -> float:
    """
    max |a − b| / (max(‖a‖∞, ‖b‖∞) + 1e-12)

    :raises DimensionError: if shapes differ
    """
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise DimensionError(f"rel_error: shapes {a.shape} and {b.shape} differ")
    if a.size == 0:
        return 0.0
    scale = max(np.abs(a).max(), np.abs(b).max()) + 1e-12
    return float(np.abs(a - b).max() / scale)


def check_gradient(
    name: str,
    f: Callable[[Tensor], float],
    x: Tensor,
    analytic: Tensor,
    eps: float = 1e-5,
    tolerance: float = 1e-5,
) -> GradReport:
    """
    Compare an analytic gradient with finite differences of f at x

    :returns: GradReport, with the coordinate of the largest disagreement
    """
    numeric = finite_diff_grad(f, x, eps)
    analytic = np.asarray(analytic)
    error = rel_error(analytic, numeric)
    worst = ()
    if numeric.size:
        worst = tuple(int(i) for i in np.unravel_index(np.abs(analytic - numeric).argmax(), numeric.shape))
    return GradReport(name=name, max_rel_error=error, worst_index=worst, tolerance=tolerance)


__all__ = [
    'check_gradient',
    'finite_diff_grad',
    'rel_error',
]
