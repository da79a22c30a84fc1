"""
Kernel runtime: precision, checked mode and the worker pool

from core.runtime import runtime

runtime.init(precision="float64", threads=1, checked=True)
results = runtime.map(fn, items)

with runtime.configured(threads=1):
    ...
"""
from __future__ import annotations

import os
import threading
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from typing import Callable, Iterable, Iterator, List, Optional, TypeVar

import numpy as np
import structlog

from core.errors import ArgumentError, NonFiniteError

logger = structlog.get_logger(__name__)

T = TypeVar("T")
R = TypeVar("R")

_PRECISIONS = {
    "float32": np.float32,
    "float64": np.float64,
}

# set on pool workers; nested map calls run inline there
_worker = threading.local()


class KernelRuntime:
    """
    Process-wide kernel settings shared by every operation.

    threads == 1 is the deterministic sequential mode; any other value
    fans work out over a ThreadPoolExecutor while keeping result order.
    """

    def __init__(self):
        self._dtype = np.float64
        self._threads = 1
        self._checked = True
        self._executor: Optional[ThreadPoolExecutor] = None

    def init(
        self,
        precision: str = "float64",
        threads: int = 0,
        checked: bool = True,
    ) -> None:
        """
        (Re)configure the runtime.

        :param precision: str, 'float32' or 'float64'
        :param threads: int, worker count; 0 means one per core
        :param checked: bool, reject NaN/Inf at operation entry
        """
        if precision not in _PRECISIONS:
            raise ArgumentError(f"Unsupported precision: {precision}")
        if threads < 0:
            raise ArgumentError(f"threads must be >= 0, got {threads}")

        self.close()
        self._dtype = _PRECISIONS[precision]
        self._threads = threads or (os.cpu_count() or 1)
        self._checked = checked
        if self._threads > 1:
            self._executor = ThreadPoolExecutor(max_workers=self._threads)
        logger.debug("runtime_init", precision=precision, threads=self._threads, checked=checked)

    @property
    def dtype(self):
        return self._dtype

    @property
    def precision(self) -> str:
        return np.dtype(self._dtype).name

    @property
    def threads(self) -> int:
        return self._threads

    @property
    def checked(self) -> bool:
        return self._checked

    def map(self, func: Callable[[T], R], items: Iterable[T]) -> List[R]:
        """
        Apply func to every item, results in input order.

        Calls made from a pool worker run inline in that worker.

        :param func: Callable, must be reentrant when threads > 1
        :param items: Iterable, work items
        :returns: List, one result per item
        """
        if self._executor is None or getattr(_worker, "active", False):
            return [func(item) for item in items]
        return list(self._executor.map(_in_worker(func), items))

    def check_finite(self, name: str, *arrays) -> None:
        """
        Raise NonFiniteError when checked mode is on and any array holds NaN/Inf.

        :param name: str, operation name used in the message
        :param arrays: ndarray, inputs to inspect
        """
        if not self._checked:
            return
        for array in arrays:
            if not np.all(np.isfinite(array)):
                raise NonFiniteError(f"{name}: non-finite input of shape {np.shape(array)}")

    @contextmanager
    def configured(self, **overrides) -> Iterator["KernelRuntime"]:
        """
        Temporarily swap runtime settings.

        Usage:
            with runtime.configured(threads=1, precision="float64"):
                ...
        """
        previous = {
            "precision": self.precision,
            "threads": self._threads,
            "checked": self._checked,
        }
        self.init(**{**previous, **overrides})
        try:
            yield self
        finally:
            self.init(**previous)

    def close(self) -> None:
        """Shut down the worker pool, if any."""
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None


def _in_worker(func: Callable[[T], R]) -> Callable[[T], R]:
    def run(item: T) -> R:
        _worker.active = True
        try:
            return func(item)
        finally:
            _worker.active = False

    return run


# Global instance (usage: runtime.init(...))
runtime = KernelRuntime()
