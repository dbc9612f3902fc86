#!/usr/bin/env python3
"""
TallyFit command-line entrypoint.

    python main.py simulate --out data/ --seed 7
    python main.py fit --method gauss --voters data/voters.csv --counts data/counts.csv --out model.json
    python main.py predict --model model.json --voters data/voters.csv --out probs.csv
    python main.py evaluate --model model.json --voters data/voters.csv --counts data/counts.csv \
        --labels data/labels.csv
    python main.py diagnose separation --voters v.csv --counts c.csv
    python main.py compare --precincts 400 --seed 3

Exit codes: 0 success, 2 invalid input, 3 divergence, 64 usage.
"""

import argparse
import logging
import sys
from typing import List, Optional

from commands import register_all
from commands.common import EXIT_DIVERGENCE, EXIT_USAGE, EXIT_VALIDATION
from config import Config
from core.container import init_container
from core.errors import DivergenceError, TallyFitError


class CliParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with 64 instead of 2."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> CliParser:
    parser = CliParser(prog="tallyfit", description="Individual-level models from precinct-level counts.")
    subparsers = parser.add_subparsers(dest="command", required=True)
    register_all(subparsers)
    return parser


def config_overrides(args: argparse.Namespace) -> dict:
    """Flags that name a Config field (unset flags are None and are skipped)."""
    return {name: getattr(args, name) for name in Config.field_names() if getattr(args, name, None) is not None}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logger = logging.getLogger("tallyfit")
    try:
        container = init_container(config_file=getattr(args, "config", None), overrides=config_overrides(args))
        return args.handler(container, args)
    except DivergenceError as e:
        logger.error(f"Diverged: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except TallyFitError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
