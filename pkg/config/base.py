
from dataclasses import dataclass, asdict, fields
from typing import Optional
from .container import EnvLoadable, Attr

_PRECISIONS = ("float32", "float64")


class DictMixin:

    def as_dict(self):
        return asdict(self)


@dataclass
class Settings(EnvLoadable, DictMixin):
    """
    base settings
    """

    # application
    app_name: str = Attr(default="hydrana", env="HYDRANA_APP_NAME")
    app_version: str = Attr(default="0.3.0", env="HYDRANA_APP_VERSION")
    debug: bool = Attr(default=False, env="HYDRANA_DEBUG")

    # logging
    log_level: str = Attr(default="INFO", env="HYDRANA_LOG_LEVEL")
    log_format: str = Attr(default="console", env="HYDRANA_LOG_FORMAT", choices=("console", "json"))

    # kernels
    kernel_precision: str = Attr(default="float64", env="HYDRANA_KERNEL_PRECISION", choices=_PRECISIONS)
    kernel_threads: int = Attr(default=0, env="HYDRANA_KERNEL_THREADS")
    kernel_checked: bool = Attr(default=True, env="HYDRANA_KERNEL_CHECKED")

    # benchmarks run at reduced precision
    bench_precision: str = Attr(default="float32", env="HYDRANA_BENCH_PRECISION", choices=_PRECISIONS)
    bench_repeats: int = Attr(default=5, env="HYDRANA_BENCH_REPEATS")

    # gradient certification
    gradcheck_eps: float = Attr(default=1e-5, env="HYDRANA_GRADCHECK_EPS")
    gradcheck_tolerance: float = Attr(default=1e-5, env="HYDRANA_GRADCHECK_TOLERANCE")
    gradcheck_cases: int = Attr(default=20, env="HYDRANA_GRADCHECK_CASES")

    # toy training
    train_lr: float = Attr(default=0.05, env="HYDRANA_TRAIN_LR")
    train_steps: int = Attr(default=200, env="HYDRANA_TRAIN_STEPS")

    rollout_hydra: Optional[str] = Attr(default=None, env="HYDRANA_ROLLOUT_HYDRA")


def init_settings(environ: Optional[dict] = None):
    settings = Settings.load_from_env(environ)
    return settings


class PartMixin:

    _prefix: str = None

    @classmethod
    def load_from_settings(cls, settings: Settings):
        if cls._prefix is None:
            raise KeyError('PartMixin must has a prefix')

        cls_field_names = {f.name for f in fields(cls)}
        prefix_length = len(cls._prefix)

        kv = {
            key[prefix_length:]: value
            for key, value in asdict(settings).items()
            if key.startswith(cls._prefix) and key[prefix_length:] in cls_field_names
        }
        return cls(**kv)
