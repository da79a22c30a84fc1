"""
per-head attention density maps
"""
from .route import register
