"""
Fréchet distance between two feature files
"""
from .route import register
