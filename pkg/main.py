import argparse
import logging
import sys
from typing import List, Optional

from rich.console import Console
from rich.logging import RichHandler

import config
from commands import analysis, example, simulation, solver, truncation
from errors import CatQueueError
from schemas import ErrorReport

logger = logging.getLogger("catqueue")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="catqueue",
        description="Ergodicity bounds, certified truncation and transient analysis "
                    "of M_t|M_t|S queues with catastrophes.")
    parser.add_argument("--version", action="version", version=f"{config.APP_NAME} {config.VERSION}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    analysis.register(subparsers)
    truncation.register(subparsers)
    solver.register(subparsers)
    simulation.register(subparsers)
    example.register(subparsers)
    return parser


def configure_logging(verbose: bool = False):
    logging.basicConfig(
        level="DEBUG" if verbose else config.LOG_LEVEL,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


def run_command(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    configure_logging(bool(args.verbose))
    try:
        args.handler(args)
    except CatQueueError as exc:
        logger.error("%s: %s", type(exc).__name__, exc.detail)
        print(ErrorReport.from_exception(exc).model_dump_json(), file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(run_command())
