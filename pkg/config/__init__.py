from .base import init_settings, Settings
from .kernel import KernelConfig
from .gradcheck import GradcheckConfig
from .logging import configure_logging

__all__ = [
    'init_settings',
    'Settings',
    'KernelConfig',
    'GradcheckConfig',
    'configure_logging',
]
