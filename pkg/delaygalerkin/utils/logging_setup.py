import logging
import sys

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


def configure_logging(level='INFO') -> None:
    """Install a single stream handler on the package logger."""
    logger = logging.getLogger('delaygalerkin')
    if isinstance(level, str):
        level = getattr(logging, level.upper(), logging.INFO)
    logger.setLevel(level)
    if not any(getattr(h, '_delaygalerkin', False) for h in logger.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._delaygalerkin = True
        logger.addHandler(handler)
