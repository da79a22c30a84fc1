import structlog

from app.utils.layout import load_layout
from core.errors import ArgumentError
from core.nbhd import count_arch_configs, count_head_configs

logger = structlog.get_logger(__name__)


def handle(args, settings) -> int:
    """
    Print one tab-separated row per resolution, then the layout total:

        8       4
        R       heads   N_c     (layout rows)
        total   13176
    """
    if not args.resolution and not args.layout:
        raise ArgumentError("pass --resolution and/or --layout")

    for resolution in args.resolution:
        print(f"{resolution}\t{count_head_configs(resolution)}")

    if args.layout:
        layout = load_layout(args.layout)
        for heads, resolution in layout.pairs():
            print(f"{resolution}\t{heads}\t{count_head_configs(resolution)}")
        total = count_arch_configs(layout.pairs(), layout.transformers_per_level)
        print(f"total\t{total}")
        logger.info("layout_counted", layout=args.layout, levels=len(layout.level), total=total)
    return 0
