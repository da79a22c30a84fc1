import numpy as np
import pytest

from core.runtime import runtime


@pytest.fixture(autouse=True)
def sequential_runtime():
    """Every test runs in the deterministic 64-bit checked mode"""
    runtime.init(precision="float64", threads=1, checked=True)
    yield runtime
    runtime.close()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
