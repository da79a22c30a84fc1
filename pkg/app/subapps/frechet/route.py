import argparse

from .handle import handle


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(
        "frechet", parents=[common], help="Fréchet distance between the Gaussian moments of two feature CSVs"
    )
    parser.add_argument("--a", required=True, help="CSV feature matrix, one sample per row")
    parser.add_argument("--b", required=True, help="CSV feature matrix, one sample per row")
    parser.set_defaults(handler=handle)
