#!/usr/bin/env python3
"""
Evaluation command:

- evaluate --model M --voters V --counts C --labels L   AUC and aggregate SSE
"""

import argparse
import logging

from commands.common import EXIT_OK, common_options, non_negative_int
from core.container import AppContainer
from services.dataset import INTERCEPT, load_dataset, load_labels, split_dev
from services.evaluator import evaluate_run, format_auc
from utils.files import dumps_json, write_json
from utils.model_io import load_model

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("evaluate", parents=[common_options()],
                                   help="score a model against individual labels")
    parser.add_argument("--model", required=True, help="model JSON written by fit")
    parser.add_argument("--voters", required=True, help="voters.csv")
    parser.add_argument("--counts", required=True, help="counts.csv")
    parser.add_argument("--labels", required=True, help="labels.csv")
    parser.add_argument("--holdout", type=non_negative_int, default=0,
                        help="score only the precincts fit --holdout N withheld (default: all voters)")
    parser.add_argument("--json", action="store_true", help="print the report as JSON")
    parser.add_argument("--out", help="also write the report JSON here")
    parser.set_defaults(handler=run)


def run(container: AppContainer, args: argparse.Namespace) -> int:
    model_file = load_model(args.model)
    intercept = bool(model_file.feature_names) and model_file.feature_names[0] == INTERCEPT
    data = load_dataset(args.voters, args.counts, standardize=False,
                        standardization=model_file.standardization, intercept=intercept)
    labeled = load_labels(args.labels, data)
    if args.holdout:
        _, held = split_dev(data, args.holdout, container.config.seed)
        labeled = labeled.subset(held.ids)
        logger.info(f"Evaluating on {len(held)} holdout precincts")

    report = evaluate_run(model_file.model, labeled, model_file.method)
    payload = report.to_dict()
    if args.out:
        write_json(args.out, payload)
    if args.json:
        print(dumps_json(payload), end="")
    else:
        print(f"AUC: {format_auc(report.auc)}")
        print(f"aggregate SSE: {report.aggregate_sse:.4f}")
    return EXIT_OK
