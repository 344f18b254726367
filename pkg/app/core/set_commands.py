import argparse

from app.cli import COMMANDS


def setup_commands(parser: argparse.ArgumentParser) -> None:
    """Register all command-line subcommands"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", metavar="PATH", help="Write the JSON run report to PATH")
    common.add_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level")

    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        command.register(subparsers, [common])
