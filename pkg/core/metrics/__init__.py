"""
Fréchet distance between Gaussian moment pairs, the closed form behind FID.

Feature extraction is not part of this package; callers supply feature
matrices (rows = samples), for example through load_features_csv.
"""
from __future__ import annotations

from pathlib import Path
from typing import Union

import numpy as np
import structlog
from scipy import linalg

from core.errors import ArgumentError, DimensionError
from core.schema import GaussianMoments

logger = structlog.get_logger(__name__)

Tensor = np.ndarray

_RESIDUE_RTOL = 1e-11


def _psd_sqrt(sigma: Tensor) -> Tensor:
    """Symmetric square root through eigh, negative noise eigenvalues dropped"""
    values, vectors = linalg.eigh(sigma)
    return (vectors * np.sqrt(np.clip(values, 0.0, None))) @ vectors.T


def frechet_gaussian(g0: GaussianMoments, g1: GaussianMoments) -> float:
    """
    sqrt(‖μ0 − μ1‖² + Tr(Σ0 + Σ1 − 2(Σ0Σ1)^{1/2}))

    Tr((Σ0Σ1)^{1/2}) is taken as Tr((Σ0^{1/2} Σ1 Σ0^{1/2})^{1/2}), which has the
    same eigenvalues but stays symmetric, so eigh applies and no complex
    residue appears.

    :param g0: GaussianMoments, first distribution
    :param g1: GaussianMoments, second distribution
    :returns: float, non-negative distance
    :raises DimensionError: if the dimensions differ
    """
    if g0.dim != g1.dim:
        raise DimensionError(f"frechet_gaussian: dimensions {g0.dim} and {g1.dim} differ")

    diff = g0.mu - g1.mu
    root0 = _psd_sqrt(g0.sigma)
    inner = root0 @ g1.sigma @ root0
    cross = np.sqrt(np.clip(linalg.eigvalsh((inner + inner.T) / 2), 0.0, None)).sum()

    scale = float(diff @ diff + np.trace(g0.sigma) + np.trace(g1.sigma))
    squared = scale - 2.0 * cross
    if squared < -1e-8:
        logger.warning("frechet_negative_residue", residue=squared)
    # rounding noise of the eigendecompositions
    if squared < _RESIDUE_RTOL * scale:
        squared = 0.0
    return float(np.sqrt(squared))


def gaussian_moments(samples: Tensor) -> GaussianMoments:
    """
    :param samples: Tensor, [N, m] with N >= 2; a 1-D array is N scalar samples
    :returns: GaussianMoments, sample mean and 1/(N − 1) covariance
    :raises ArgumentError: if N < 2
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[:, None]
    if samples.ndim != 2:
        raise DimensionError(f"samples must be [N, m], got {samples.shape}")
    if samples.shape[0] < 2:
        raise ArgumentError(f"need at least 2 samples, got {samples.shape[0]}")

    sigma = np.atleast_2d(np.cov(samples, rowvar=False, ddof=1))
    return GaussianMoments(mu=samples.mean(axis=0), sigma=(sigma + sigma.T) / 2)


def load_features_csv(path: Union[str, Path]) -> Tensor:
    """
    Feature matrix from a comma-separated file, one sample per row.
    Lines starting with '#' are skipped.

    :raises OSError: if the file cannot be read
    """
    features = np.loadtxt(path, delimiter=",", comments="#", ndmin=2, dtype=np.float64)
    logger.debug("features_loaded", path=str(path), shape=features.shape)
    return features


__all__ = [
    'frechet_gaussian',
    'gaussian_moments',
    'load_features_csv',
]
