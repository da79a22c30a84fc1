import argparse

from core.attention import AttentionKind

from .handle import handle


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("bench", parents=[common], help="time one attention layer, append CSV rows")
    parser.add_argument("--kind", choices=[k.value for k in AttentionKind], required=True)
    parser.add_argument("--size", type=int, nargs=2, action="append", metavar=("H", "W"),
                        help="token grid, repeatable to sweep sizes (default 16 16)")
    parser.add_argument("--dmodel", type=int, default=32)
    parser.add_argument("--heads", type=int, default=4)
    parser.add_argument("--kernel", type=int, default=7)
    parser.add_argument("--dilation", type=int, default=1)
    parser.add_argument("--hydra", help="head groups for --kind hydra, e.g. 7x1:2,7x2:2")
    parser.add_argument("--repeats", type=int, help="timed runs per size, the median is reported")
    parser.add_argument("--precision", choices=["float32", "float64"])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--csv", required=True, help="output file, rows are appended")
    parser.set_defaults(handler=handle)
