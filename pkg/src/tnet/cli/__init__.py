"""``tnet`` command-line entry point.

Usage: ``tnet {train|eval|predict|gradcheck|bench|sweep} [--config FILE] [--key value]...``

Exit codes: 0 ok, 1 usage/config error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import logging
import sys

from ..errors import ConfigError, TNetError
from . import config as config_mod
from .commands import COMMANDS

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    keys = ", ".join(sorted(config_mod.KEYS))
    p = argparse.ArgumentParser(
        prog="tnet", description="Terrace decoder segmentation engine",
        epilog=f"Any configuration key may be given as --key value (dashes or underscores): {keys}",
    )
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="flat key = value configuration file")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = _parser()
    try:
        args, rest = parser.parse_known_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = config_mod.load(args.config, rest)
    except ConfigError as e:
        print(f"tnet: {e}", file=sys.stderr)
        return EXIT_USAGE
    from threadpoolctl import threadpool_limits

    try:
        with threadpool_limits(cfg.threads):
            COMMANDS[args.command](cfg)
    except TNetError as e:
        print(f"tnet {args.command}: {e}", file=sys.stderr)
        return e.exit_code
    return EXIT_OK
