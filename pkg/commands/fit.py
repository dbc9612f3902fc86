#!/usr/bin/env python3
"""
Fitting command:

- fit --method M --voters V --counts C --out MODEL   model JSON plus fit-report JSON
"""

import argparse
import logging
import os
from datetime import datetime, timezone
from typing import Any, Dict

from commands.common import (
    EXIT_DIVERGENCE,
    EXIT_OK,
    FIT_METHODS,
    common_options,
    float_list,
    non_negative_int,
    positive_float,
    positive_int,
)
from core.container import AppContainer
from services.dataset import Dataset, load_dataset, split_dev
from services.neural_net import fit_neural
from services.optimizer import fit
from utils.files import write_json
from utils.model_io import ModelFile, save_model

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("fit", parents=[common_options()], help="fit a model to precinct counts")
    parser.add_argument("--method", choices=FIT_METHODS, default="gauss")
    parser.add_argument("--voters", required=True, help="voters.csv")
    parser.add_argument("--counts", required=True, help="counts.csv")
    parser.add_argument("--out", required=True, help="model JSON to write")
    parser.add_argument("--report", help="fit-report JSON (default: <out>.report.json)")
    parser.add_argument("--holdout", type=non_negative_int, default=0,
                        help="precincts withheld from fitting (same split as evaluate --holdout)")
    parser.add_argument("--dev-precincts", dest="dev_precincts", type=non_negative_int,
                        help="neural tuning precincts (default 40)")
    parser.add_argument("--lr", type=positive_float, help="learning rate for logit methods")
    parser.add_argument("--iters", dest="iters_total", type=non_negative_int, help="total iterations (logit)")
    parser.add_argument("--hidden", dest="nn_hidden", type=positive_int, help="hidden units (neural)")
    parser.add_argument("--restarts", dest="nn_restarts", type=positive_int, help="restarts (neural)")
    parser.add_argument("--nn-lr", dest="nn_lr", type=positive_float, help="learning rate (neural)")
    parser.add_argument("--init-beta", dest="init_beta", type=float_list, help="starting coefficients (logit)")
    parser.add_argument("--no-standardize", dest="standardize", action="store_const", const=False,
                        help="use covariates as given")
    parser.add_argument("--record-timing", action="store_true",
                        help="store wall time and training timestamp in the artifacts")
    parser.set_defaults(handler=run)


def default_report_path(model_path: str) -> str:
    root, _ = os.path.splitext(model_path)
    return f"{root}.report.json"


def precinct_means(model, data: Dataset) -> Dict[str, float]:
    """Expected counts per precinct under the fitted model."""
    mu = data.stacked.segment_sum(model.predict_proba(data.stacked.X))
    return {pid: float(v) for pid, v in zip(data.ids, mu)}


def run(container: AppContainer, args: argparse.Namespace) -> int:
    cfg = container.config
    data = load_dataset(args.voters, args.counts, standardize=cfg.standardize)
    if args.holdout:
        data, held = split_dev(data, args.holdout, cfg.seed)
        logger.info(f"Holding out {len(held)} precincts; fitting on {len(data)}")

    if args.method == "neural":
        train, dev = split_dev(data, cfg.dev_precincts, cfg.seed)
        model, report = fit_neural(train, dev, container.neural_config)
        run_config: Dict[str, Any] = container.neural_config.to_dict()
    else:
        extra = {"init_beta": args.init_beta} if args.init_beta is not None else {}
        fit_config = container.fit_config_for(args.method, **extra)
        model, report = fit(data, fit_config)
        run_config = fit_config.to_dict()
    run_config["holdout"] = args.holdout

    trained_at = datetime.now(timezone.utc).isoformat() if args.record_timing else None
    save_model(args.out, ModelFile(model, data.feature_names, data.standardization, args.method, run_config,
                                   trained_at))

    payload = report.to_dict(include_timing=args.record_timing)
    payload["precinct_mu"] = precinct_means(model, data)
    report_path = args.report or default_report_path(args.out)
    write_json(report_path, payload)

    print(f"final objective: {report.final_objective}")
    print(f"wall time: {report.wall_time:.3f}s")
    if report.diverged:
        logger.error(f"{args.method} diverged: {report.divergence_reason}")
        return EXIT_DIVERGENCE
    return EXIT_OK
