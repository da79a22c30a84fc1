"""
end-to-end training demo on synthetic stripes
"""
from .route import register
