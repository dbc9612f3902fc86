#!/usr/bin/env python3
"""
Shared command-line pieces: the options every command accepts and argument
parsers for the comma-separated values used by several commands.
"""

import argparse
from typing import List, Tuple, Union

from services.optimizer import METHODS


EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DIVERGENCE = 3
EXIT_USAGE = 64

FIT_METHODS = METHODS + ("neural",)


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def non_negative_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {value}")
    return value


def float_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def voters_spec(text: str) -> Union[int, Tuple[int, int]]:
    """'100' or a range '80-120'."""
    if "-" in text.strip()[1:]:
        low, high = text.split("-", 1)
        low_value, high_value = positive_int(low), positive_int(high)
        if low_value > high_value:
            raise argparse.ArgumentTypeError(f"empty range {text!r}")
        return low_value, high_value
    return positive_int(text)


def beta_spec(text: str) -> Union[str, List[float]]:
    return "random" if text.strip() == "random" else float_list(text)


def common_options() -> argparse.ArgumentParser:
    """Parent parser with the options shared by every command."""
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group("common options")
    group.add_argument("--config", help="key=value configuration file (flags override it)")
    group.add_argument("--seed", type=int, help="random seed (default from config, 0)")
    group.add_argument("--threads", type=positive_int, help="cap on worker threads")
    group.add_argument("--log-level", dest="log_level", help="DEBUG, INFO, WARNING or ERROR")
    group.add_argument("--log-file", dest="log_file", help="also write the log to this file")
    return parent


def add_simulation_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--precincts", type=positive_int, default=400, help="number of precincts")
    parser.add_argument("--voters", type=voters_spec, default=100, help="voters per precinct, N or LO-HI")
    parser.add_argument("--covariates", type=positive_int, default=5, help="covariates per voter (intercept extra)")
    parser.add_argument("--beta", type=beta_spec, default="random",
                        help="true coefficients, intercept first, or 'random'")
    parser.add_argument("--scheme", choices=("iid-normal", "precinct-shifted-normal"),
                        default="precinct-shifted-normal", help="covariate scheme")
    parser.add_argument("--shift-scale", dest="shift_scale", type=float_list, default=[0.5],
                        help="precinct mean scale, one value or one per covariate")


def shift_scale_value(values: List[float]) -> Union[float, List[float]]:
    return values[0] if len(values) == 1 else values
