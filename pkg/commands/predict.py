#!/usr/bin/env python3
"""
Prediction command:

- predict --model M --voters V --out probs.csv   precinct_id,voter_id,prob
"""

import argparse
import logging

import pandas as pd

from commands.common import EXIT_OK, common_options
from core.container import AppContainer
from services.dataset import load_voters_for_prediction
from utils.files import ensure_parent_dir
from utils.model_io import load_model

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("predict", parents=[common_options()],
                                   help="per-voter probabilities from a model file")
    parser.add_argument("--model", required=True, help="model JSON written by fit")
    parser.add_argument("--voters", required=True, help="voters.csv")
    parser.add_argument("--out", required=True, help="probs.csv to write")
    parser.set_defaults(handler=run)


def run(container: AppContainer, args: argparse.Namespace) -> int:
    model_file = load_model(args.model)
    blocks = load_voters_for_prediction(args.voters, model_file.feature_names, model_file.standardization)

    frames = []
    for precinct_id, voter_ids, X in blocks:
        frames.append(pd.DataFrame({
            "precinct_id": precinct_id,
            "voter_id": list(voter_ids),
            "prob": model_file.model.predict_proba(X),
        }))
    out = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=["precinct_id", "voter_id", "prob"])

    ensure_parent_dir(args.out)
    out.to_csv(args.out, index=False, lineterminator="\n")
    logger.info(f"Wrote {len(out)} probabilities ({model_file.model.kind} model) to {args.out}")
    print(args.out)
    return EXIT_OK
