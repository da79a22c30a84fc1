from pathlib import Path
from typing import List

import numpy as np
import structlog

from app.models import HydraClassifier
from app.utils.stripes import make_stripes
from core.rollout import accumulate_density, write_pgm
from core.schema import DensityMap, HydraConfig, TokenizerConfig

logger = structlog.get_logger(__name__)

DEFAULT_HYDRA = "3x1:2,3x4:2"
IMAGE_SIZE = 32
EMBED_DIM = 16
BLOCKS = 2


def density_maps(seed: int, hydra: HydraConfig) -> List[DensityMap]:
    """Seeded 2-block model on one stripes image, one map per (block, head)"""
    rng = np.random.default_rng(seed)
    model = HydraClassifier(
        TokenizerConfig.cct(1, EMBED_DIM), hydra, (IMAGE_SIZE, IMAGE_SIZE), n_blocks=BLOCKS, rng=rng
    )
    image = make_stripes(1, rng, size=IMAGE_SIZE, dtype=model.dtype).images[0]

    maps = []
    for layer, state in enumerate(model.attention_maps(image)):
        for head in range(state.heads):
            probs = state.head_probs(head)[0]
            maps.append(accumulate_density(probs, state.specs[head], model.grid, layer=layer, head=head))
    return maps


def handle(args, settings) -> int:
    hydra = HydraConfig.parse(args.hydra or settings.rollout_hydra or DEFAULT_HYDRA)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    for density in density_maps(args.seed, hydra):
        path = outdir / f"layer{density.layer}_head{density.head}.pgm"
        write_pgm(density, path)
        print(path)
    logger.info("rollout_written", outdir=str(outdir), heads=hydra.heads, blocks=BLOCKS)
    return 0
