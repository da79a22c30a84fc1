import numpy as np
import structlog

from app.models import HydraClassifier
from app.utils.records import MetricRecord, write_records
from app.utils.stripes import stripes_dataset
from core.errors import ArgumentError
from core.runtime import runtime
from core.schema import HydraConfig, TokenizerConfig

logger = structlog.get_logger(__name__)

IMAGE_SIZE = 16
EMBED_DIM = 16


def train(seed: int, steps: int, hydra: HydraConfig, lr: float, blocks: int = 2, positional: str = "sinusoidal"):
    """
    :returns: (metric rows for steps 0..steps, final test accuracy)
    """
    train_set, test_set = stripes_dataset(seed, size=IMAGE_SIZE, dtype=runtime.dtype)
    model = HydraClassifier(
        TokenizerConfig.cct(1, EMBED_DIM),
        hydra,
        (IMAGE_SIZE, IMAGE_SIZE),
        n_blocks=blocks,
        positional=positional,
        rng=np.random.default_rng(seed),
    )

    records = []
    for step in range(steps):
        loss, acc = model.step(train_set.images, train_set.labels, lr)
        records.append(MetricRecord(step, loss, acc))
        if step % 20 == 0:
            logger.info("train_step", step=step, loss=loss, accuracy=acc)
    loss, acc = model.evaluate(train_set.images, train_set.labels)
    records.append(MetricRecord(steps, loss, acc))

    _, test_acc = model.evaluate(test_set.images, test_set.labels)
    logger.info("train_done", steps=steps, loss=loss, accuracy=acc, test_accuracy=test_acc)
    return records, test_acc


def handle(args, settings) -> int:
    steps = settings.train_steps if args.steps is None else args.steps
    if steps < 0:
        raise ArgumentError(f"--steps must be >= 0, got {steps}")
    if args.blocks < 0:
        raise ArgumentError(f"--blocks must be >= 0, got {args.blocks}")
    lr = settings.train_lr if args.lr is None else args.lr
    hydra = HydraConfig.parse(args.hydra)

    records, test_acc = train(args.seed, steps, hydra, lr, args.blocks, args.pe)
    write_records(args.out, records, MetricRecord)
    print(f"test_accuracy\t{test_acc:.4f}")
    return 0
