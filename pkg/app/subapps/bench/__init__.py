"""
attention layer benchmarks
"""
from .route import register
