"""Application factory"""

import argparse

from app import __version__
from app.core.config import settings
from app.core.initializer import startup_handler
from app.core.set_commands import setup_commands
from app.utils.exceptions import EXIT_USAGE


def create_app() -> argparse.ArgumentParser:
    """Create and configure the command-line parser"""
    parser = argparse.ArgumentParser(prog=settings.APP_TITLE, description=settings.APP_DESCRIPTION)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    # Setup commands
    setup_commands(parser)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = create_app()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage errors and 0 for --help / --version
        return EXIT_USAGE if e.code not in (0, None) else 0
    startup_handler(args)
    return args.handler(args)
