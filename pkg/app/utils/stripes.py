"""
Synthetic stripes dataset for the toy training command.

Class 0 holds horizontal stripes, class 1 vertical stripes. Stripes have
period 4 with a random phase, pixel values ±1 plus Gaussian noise.
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np

PERIOD = 4
NOISE = 0.1


@dataclass(eq=False)
class StripesSplit:
    images: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return self.labels.shape[0]


def make_stripes(
    n: int, rng: np.random.Generator, size: int = 16, noise: float = NOISE, dtype=np.float64
) -> StripesSplit:
    """
    :param n: int, number of images, classes alternate 0, 1, 0, ...
    :param rng: np.random.Generator, phase and noise source
    :param size: int, image side
    :returns: StripesSplit, images [n, 1, size, size] and labels [n]
    """
    labels = np.arange(n) % 2
    phases = rng.integers(0, PERIOD, size=n)
    axis = np.arange(size)
    images = np.empty((n, 1, size, size), dtype=np.float64)
    for i in range(n):
        wave = np.where(((axis + phases[i]) // (PERIOD // 2)) % 2 == 0, 1.0, -1.0)
        pattern = np.repeat(wave[:, None], size, axis=1)
        images[i, 0] = pattern if labels[i] == 0 else pattern.T
    images += rng.normal(0.0, noise, size=images.shape)
    return StripesSplit(images=images.astype(dtype), labels=labels)


def stripes_dataset(
    seed: int, n_train: int = 256, n_test: int = 64, size: int = 16, dtype=np.float64
) -> Tuple[StripesSplit, StripesSplit]:
    """Seeded (train, test) splits"""
    rng = np.random.default_rng(seed)
    return make_stripes(n_train, rng, size, dtype=dtype), make_stripes(n_test, rng, size, dtype=dtype)
