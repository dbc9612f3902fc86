#!/usr/bin/env python3
"""
Method comparison command:

- compare [simulation options] [--neural]   one results row per method on labeled data
- compare --voters V --counts C --labels L  the same on files
"""

import argparse
import logging

from commands.common import (
    EXIT_OK,
    add_simulation_options,
    common_options,
    non_negative_int,
    positive_int,
)
from commands.simulate import sim_config_from_args
from core.container import AppContainer
from core.errors import ValidationError
from services.dataset import load_dataset, load_labels, split_dev
from services.evaluator import compare_methods, format_comparison
from services.simulator import simulate
from utils.files import dumps_json

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("compare", parents=[common_options()],
                                   help="fit every method and compare holdout AUC")
    add_simulation_options(parser)
    parser.add_argument("--voters-file", dest="voters_file", help="voters.csv (instead of simulating)")
    parser.add_argument("--counts", help="counts.csv")
    parser.add_argument("--labels", help="labels.csv")
    parser.add_argument("--holdout", type=positive_int, default=100, help="precincts scored, never fitted")
    parser.add_argument("--dev-precincts", dest="dev_precincts", type=non_negative_int,
                        help="neural tuning precincts (default 40)")
    parser.add_argument("--neural", action="store_true", help="include the network")
    parser.add_argument("--json", action="store_true", help="print the rows as JSON")
    parser.set_defaults(handler=run)


def run(container: AppContainer, args: argparse.Namespace) -> int:
    cfg = container.config
    if args.voters_file:
        if not (args.counts and args.labels):
            raise ValidationError("--voters-file needs --counts and --labels")
        data = load_dataset(args.voters_file, args.counts, standardize=cfg.standardize)
        labeled = load_labels(args.labels, data)
    else:
        labeled = simulate(sim_config_from_args(args, cfg.seed)).labeled

    train_data, held = split_dev(labeled.data, args.holdout, cfg.seed)
    rows = compare_methods(
        labeled.subset(train_data.ids),
        labeled.subset(held.ids),
        container.fit_config,
        container.neural_config if args.neural else None,
        dev_precincts=cfg.dev_precincts,
        seed=cfg.seed,
    )
    if args.json:
        print(dumps_json([vars(row) for row in rows]), end="")
    else:
        print(format_comparison(rows))
    return EXIT_OK
