import sys
from contextlib import nullcontext

import orjson
import structlog

from config import GradcheckConfig
from core.errors import ArgumentError
from core.gradcheck.suites import run_suites, sabotage
from core.runtime import runtime

logger = structlog.get_logger(__name__)


def handle(args, settings) -> int:
    """Exit 0 iff every op passes"""
    cfg = GradcheckConfig.load_from_settings(settings)
    cases = cfg.cases if args.cases is None else args.cases
    if cases < 0:
        raise ArgumentError(f"--cases must be >= 0, got {cases}")

    guard = sabotage(args.sabotage) if args.sabotage else nullcontext()
    with runtime.configured(precision="float64"), guard:
        reports = run_suites(args.seed, cases, cfg.eps, cfg.tolerance, args.op)

    if args.json:
        payload = {op: report.to_dict() for op, report in reports.items()}
        sys.stdout.write(orjson.dumps(payload, option=orjson.OPT_INDENT_2).decode() + "\n")
    else:
        for op, report in reports.items():
            status = "PASS" if report.passed else "FAIL"
            print(f"{op:<18} {status}  max_rel_error={report.max_rel_error:.3e}  worst={report.name}{list(report.worst_index)}")

    failed = [op for op, report in reports.items() if not report.passed]
    logger.info("gradcheck_done", seed=args.seed, cases=cases, failed=failed)
    return 1 if failed else 0
