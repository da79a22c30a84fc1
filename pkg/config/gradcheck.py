"""
gradient certification settings
"""

from dataclasses import dataclass
from .container import Attr, EnvLoadable
from .base import PartMixin, DictMixin


@dataclass
class GradcheckConfig(EnvLoadable, PartMixin, DictMixin):

    _prefix = "gradcheck_"

    eps: float = Attr(default=1e-5, env="HYDRANA_GRADCHECK_EPS")
    tolerance: float = Attr(default=1e-5, env="HYDRANA_GRADCHECK_TOLERANCE")
    cases: int = Attr(default=20, env="HYDRANA_GRADCHECK_CASES")
