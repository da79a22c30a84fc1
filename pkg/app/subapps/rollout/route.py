import argparse

from .handle import handle


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(
        "rollout", parents=[common], help="write one PGM density map per (block, head)"
    )
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--hydra", help="head groups, default 3x1:2,3x4:2")
    parser.add_argument("--outdir", required=True)
    parser.set_defaults(handler=handle)
