import statistics
import time
from typing import Callable, List, Optional, Tuple

import numpy as np
import structlog

from app.utils.records import BenchRecord, write_records
from core.attention import (
    AttentionKind,
    AttentionParams,
    flop_mem_estimate,
    hydra_forward_2d,
    mha_dense_forward,
    na_forward_2d,
)
from core.errors import ArgumentError
from core.runtime import runtime
from core.schema import HydraConfig, NeighborhoodSpec

logger = structlog.get_logger(__name__)


def _layer(kind: AttentionKind, args, dims: Tuple[int, int], rng) -> Tuple[Callable[[], object], BenchRecord]:
    height, width = dims
    spec: Optional[NeighborhoodSpec] = None
    config: Optional[HydraConfig] = None
    heads = args.heads

    if kind is AttentionKind.DENSE:
        params = AttentionParams.init(args.dmodel, heads, rng)
        x = rng.standard_normal((height * width, args.dmodel)).astype(runtime.dtype)
        run = lambda: mha_dense_forward(x, params, heads)
        k = d = "-"
    elif kind is AttentionKind.NA:
        spec = NeighborhoodSpec(args.kernel, args.dilation)
        spec.require_valid(height)
        spec.require_valid(width)
        params = AttentionParams.init(args.dmodel, HydraConfig.uniform(heads, spec), rng)
        x = rng.standard_normal((height, width, args.dmodel)).astype(runtime.dtype)
        run = lambda: na_forward_2d(x, params, heads, spec)
        k, d = str(spec.k), str(spec.d)
    else:
        if not args.hydra:
            raise ArgumentError("--kind hydra needs --hydra")
        config = HydraConfig.parse(args.hydra)
        heads = config.heads
        config.validate(heads, dims)
        params = AttentionParams.init(args.dmodel, config, rng)
        x = rng.standard_normal((height, width, args.dmodel)).astype(runtime.dtype)
        run = lambda: hydra_forward_2d(x, params, config)
        k = "/".join(str(g.spec.k) for g in config.partitions)
        d = "/".join(str(g.spec.d) for g in config.partitions)

    cost = flop_mem_estimate(kind, dims, args.dmodel, heads=heads, spec=spec, config=config)
    record = BenchRecord(
        kind=kind.value, H=height, W=width, d_model=args.dmodel, heads=heads, k=k, d=d,
        time_ns=0, macs=cost.macs, attn_state=cost.attn_state,
    )
    return run, record


def _median_ns(run: Callable[[], object], repeats: int) -> int:
    run()  # warm-up, fills the neighbor-table caches
    samples = []
    for _ in range(repeats):
        start = time.perf_counter_ns()
        run()
        samples.append(time.perf_counter_ns() - start)
    return int(statistics.median(samples))


def handle(args, settings) -> int:
    kind = AttentionKind(args.kind)
    repeats = args.repeats if args.repeats is not None else settings.bench_repeats
    if repeats < 1:
        raise ArgumentError(f"--repeats must be >= 1, got {repeats}")
    sizes = [tuple(s) for s in args.size] if args.size else [(16, 16)]
    precision = args.precision or settings.bench_precision

    rng = np.random.default_rng(args.seed)
    records: List[BenchRecord] = []
    with runtime.configured(precision=precision):
        for dims in sizes:
            run, record = _layer(kind, args, dims, rng)
            record.time_ns = _median_ns(run, repeats)
            records.append(record)
            logger.info("bench_row", kind=record.kind, H=record.H, W=record.W,
                        time_ns=record.time_ns, macs=record.macs, attn_state=record.attn_state)

    write_records(args.csv, records, BenchRecord, append=True)
    return 0
