import argparse

from .handle import handle


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(
        "configs", parents=[common], help="count legal (kernel, dilation) head configurations"
    )
    parser.add_argument("--resolution", type=int, action="append", default=[], metavar="R",
                        help="feature-map resolution, repeatable")
    parser.add_argument("--layout", help="TOML layout file with transformers_per_level and [[level]] tables")
    parser.set_defaults(handler=handle)
