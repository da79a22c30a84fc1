import argparse

from core.gradcheck.suites import SUITES

from .handle import handle


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(
        "gradcheck", parents=[common], help="check analytic gradients against finite differences"
    )
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--cases", type=int, help="random instances per op")
    parser.add_argument("--op", action="append", choices=sorted(SUITES), help="restrict to an op, repeatable")
    parser.add_argument("--json", action="store_true", help="print reports as JSON")
    # negative control for the suites themselves
    parser.add_argument("--sabotage", choices=sorted(SUITES), help=argparse.SUPPRESS)
    parser.set_defaults(handler=handle)
