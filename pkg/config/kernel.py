"""
kernel runtime settings
"""

from dataclasses import dataclass
from .container import Attr, EnvLoadable
from .base import PartMixin, DictMixin


@dataclass
class KernelConfig(EnvLoadable, PartMixin, DictMixin):

    _prefix = "kernel_"

    precision: str = Attr(default="float64", env="HYDRANA_KERNEL_PRECISION", choices=("float32", "float64"))
    # 0 means one worker per core
    threads: int = Attr(default=0, env="HYDRANA_KERNEL_THREADS")
    checked: bool = Attr(default=True, env="HYDRANA_KERNEL_CHECKED")
