import argparse

from core.embed import PositionalKind

from .handle import handle


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(
        "toytrain", parents=[common], help="train a small Hydra-NA classifier on synthetic stripes"
    )
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--steps", type=int, help="full-batch descent steps")
    parser.add_argument("--hydra", default="7x1:2,3x1:2", help="head groups, KxD:HEADS,...")
    parser.add_argument("--blocks", type=int, default=2, help="residual attention blocks")
    parser.add_argument("--pe", choices=[k.value for k in PositionalKind], default=PositionalKind.SINUSOIDAL.value)
    parser.add_argument("--lr", type=float, help="learning rate")
    parser.add_argument("--out", required=True, help="metrics CSV: step,loss,accuracy")
    parser.set_defaults(handler=handle)
