"""
head configuration counting
"""
from .route import register
