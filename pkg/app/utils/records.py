"""
CSV records written by the bench and toytrain commands.

bench:    kind,H,W,d_model,heads,k,d,time_ns,macs,attn_state
toytrain: step,loss,accuracy
"""
import csv
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Iterable, List, Type, TypeVar, Union

R = TypeVar("R")


@dataclass
class BenchRecord:
    """
    One benchmarked attention layer.

    k and d are '-' for dense rows and '/'-joined per head group for hydra rows.
    """
    kind: str
    H: int
    W: int
    d_model: int
    heads: int
    k: str
    d: str
    time_ns: int
    macs: int
    attn_state: int


@dataclass
class MetricRecord:
    step: int
    loss: float
    accuracy: float


def header(record_cls: Type) -> List[str]:
    return [f.name for f in fields(record_cls)]


def write_records(path: Union[str, Path], records: Iterable, record_cls: Type, append: bool = False) -> None:
    """
    Write records as CSV; appending to an existing non-empty file skips the header

    :raises OSError: if the file cannot be written
    """
    path = Path(path)
    write_header = not (append and path.exists() and path.stat().st_size > 0)
    with path.open("a" if append else "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        if write_header:
            writer.writerow(header(record_cls))
        for record in records:
            writer.writerow(_format(v) for v in astuple(record))


def _format(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def read_records(path: Union[str, Path], record_cls: Type[R]) -> List[R]:
    """
    :raises ValueError: if the header does not match record_cls
    """
    with Path(path).open(newline="") as f:
        reader = csv.reader(f)
        head = next(reader, None)
        if head != header(record_cls):
            raise ValueError(f"{path}: expected header {header(record_cls)}, got {head}")
        types = [f.type for f in fields(record_cls)]
        return [record_cls(*(_parse(t, v) for t, v in zip(types, row))) for row in reader if row]


def _parse(type_, value: str):
    type_ = {"int": int, "float": float, "str": str}.get(type_, type_)
    return type_(value)
