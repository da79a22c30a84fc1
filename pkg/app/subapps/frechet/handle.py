import structlog

from core.metrics import frechet_gaussian, gaussian_moments, load_features_csv

logger = structlog.get_logger(__name__)


def handle(args, settings) -> int:
    g0 = gaussian_moments(load_features_csv(args.a))
    g1 = gaussian_moments(load_features_csv(args.b))
    distance = frechet_gaussian(g0, g1)
    logger.info("frechet", a=args.a, b=args.b, dim=g0.dim, distance=distance)
    print(f"{distance:.10g}")
    return 0
