import logging
import sys


def setup_logging(level: str = "INFO"):
    """Setup console logging for command-line runs (stderr, stdout carries the summary)"""
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[logging.StreamHandler(sys.stderr)],
        force=True,
    )
    logging.getLogger().setLevel(level)
