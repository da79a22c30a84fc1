"""
randomized VJP certification
"""
from .route import register
