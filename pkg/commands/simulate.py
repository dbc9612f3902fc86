#!/usr/bin/env python3
"""
Simulation command:

- simulate --out DIR   voters.csv, counts.csv, labels.csv and truth.json
"""

import argparse
import logging

from commands.common import EXIT_OK, add_simulation_options, common_options, shift_scale_value
from core.container import AppContainer
from services.simulator import SimConfig, simulate, write_simulation
from utils.files import ensure_dir

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("simulate", parents=[common_options()],
                                   help="generate a synthetic election with known coefficients")
    add_simulation_options(parser)
    parser.add_argument("--out", required=True, help="output directory")
    parser.set_defaults(handler=run)


def sim_config_from_args(args: argparse.Namespace, seed: int) -> SimConfig:
    return SimConfig(
        n_precincts=args.precincts,
        voters_per_precinct=args.voters,
        p=args.covariates,
        beta_true=args.beta,
        covariate_scheme=args.scheme,
        precinct_shift_scale=shift_scale_value(args.shift_scale),
        seed=seed,
    )


def run(container: AppContainer, args: argparse.Namespace) -> int:
    cfg = sim_config_from_args(args, container.config.seed)
    ensure_dir(args.out)
    paths = write_simulation(simulate(cfg), args.out)
    for name in ("voters", "counts", "labels", "truth"):
        print(paths[name])
    logger.info(f"Simulation written to {args.out}")
    return EXIT_OK
