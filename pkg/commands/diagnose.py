#!/usr/bin/env python3
"""
Diagnostic commands:

- diagnose separation --voters V --counts C [--heuristic]   separation certificate or "none found"
- diagnose hessian --voters V --counts C --beta B            eigenvalues of the exact Hessian
- diagnose concavity [--out table.csv]                       largest eigenvalue vs number of precincts
- diagnose nonconcave [--out instance.json]                  random search for mixed curvature
"""

import argparse
import logging

from commands.common import (
    EXIT_OK,
    common_options,
    float_list,
    int_list,
    positive_int,
    shift_scale_value,
)
from core.container import AppContainer
from core.errors import DomainError
from services.dataset import load_dataset
from services.diagnostics import (
    CONCAVITY_SIZES,
    asymptotic_concavity_experiment,
    detect_separation,
    find_nonconcave_instance,
    hessian_probe,
    write_concavity_csv,
)
from services.simulator import SimConfig
from utils.files import dumps_json, ensure_parent_dir, write_json

logger = logging.getLogger(__name__)


def _add_data_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--voters", required=True, help="voters.csv")
    parser.add_argument("--counts", required=True, help="counts.csv")
    parser.add_argument("--no-intercept", dest="intercept", action="store_false",
                        help="use the covariates without prepending an intercept column")
    parser.add_argument("--no-standardize", dest="standardize", action="store_const", const=False,
                        help="use covariates as given")


def register(subparsers) -> None:
    parser = subparsers.add_parser("diagnose", help="likelihood shape diagnostics")
    commands = parser.add_subparsers(dest="diagnostic", required=True)

    separation = commands.add_parser("separation", parents=[common_options()],
                                     help="search for a perfect-separation certificate")
    _add_data_options(separation)
    separation.add_argument("--heuristic", action="store_true",
                            help="allow the direction-ranking search when enumeration is over the cap")
    separation.set_defaults(handler=run_separation)

    hessian = commands.add_parser("hessian", parents=[common_options()], help="eigenvalues of the exact Hessian")
    _add_data_options(hessian)
    hessian.add_argument("--beta", type=float_list, required=True, help="coefficients, comma-separated")
    hessian.set_defaults(handler=run_hessian)

    concavity = commands.add_parser("concavity", parents=[common_options()],
                                    help="largest Hessian eigenvalue at the true beta as precincts grow")
    concavity.add_argument("--sizes", type=int_list, default=list(CONCAVITY_SIZES), help="precinct counts")
    concavity.add_argument("--voters", type=positive_int, default=8, help="voters per precinct")
    concavity.add_argument("--covariates", type=positive_int, default=2, help="covariates per voter")
    concavity.add_argument("--beta", type=float_list, help="true coefficients, intercept first (default random)")
    concavity.add_argument("--shift-scale", dest="shift_scale", type=float_list, default=[1.0],
                           help="precinct mean scale")
    concavity.add_argument("--out", help="CSV table to write (columns n,max_eig)")
    concavity.set_defaults(handler=run_concavity)

    nonconcave = commands.add_parser("nonconcave", parents=[common_options()],
                                     help="random search for an instance with mixed-sign curvature")
    nonconcave.add_argument("--budget", type=positive_int, default=10_000, help="number of random draws")
    nonconcave.add_argument("--out", help="JSON file for the instance found")
    nonconcave.set_defaults(handler=run_nonconcave)


def _load(container: AppContainer, args: argparse.Namespace):
    standardize = container.config.standardize if args.standardize is None else args.standardize
    return load_dataset(args.voters, args.counts, standardize=standardize, intercept=args.intercept)


def run_separation(container: AppContainer, args: argparse.Namespace) -> int:
    cfg = container.config
    data = _load(container, args)
    cert = detect_separation(data, cap=cfg.separation_cap, heuristic=args.heuristic, seed=cfg.seed,
                             n_random=cfg.separation_random_directions)
    if cert is None:
        print("none found")
    else:
        print(dumps_json(cert.to_dict(data)), end="")
    return EXIT_OK


def run_hessian(container: AppContainer, args: argparse.Namespace) -> int:
    data = _load(container, args)
    if len(args.beta) != data.p:
        raise DomainError(f"--beta has {len(args.beta)} entries, data has p={data.p} ({', '.join(data.feature_names)})")
    probe = hessian_probe(data, args.beta, container.config.enumeration_cap)
    print(dumps_json(probe.to_dict()), end="")
    return EXIT_OK


def run_concavity(container: AppContainer, args: argparse.Namespace) -> int:
    base = SimConfig(
        n_precincts=1,
        voters_per_precinct=args.voters,
        p=args.covariates,
        beta_true=args.beta if args.beta is not None else "random",
        covariate_scheme="precinct-shifted-normal",
        precinct_shift_scale=shift_scale_value(args.shift_scale),
        seed=container.config.seed,
    )
    rows = asymptotic_concavity_experiment(base, args.sizes, container.config.enumeration_cap)
    if args.out:
        ensure_parent_dir(args.out)
        write_concavity_csv(rows, args.out)
    print("n,max_eig")
    for row in rows:
        print(f"{row.n},{row.max_eig!r}")
    return EXIT_OK


def run_nonconcave(container: AppContainer, args: argparse.Namespace) -> int:
    found = find_nonconcave_instance(args.budget, container.config.seed)
    if found is None:
        print("none found")
        return EXIT_OK
    payload = {
        "beta": found.beta,
        "eigenvalues": found.eigenvalues,
        "draws": found.draws,
        "precincts": [{"id": pr.id, "X": pr.X, "D": pr.D} for pr in found.data],
    }
    if args.out:
        write_json(args.out, payload)
    print(dumps_json(payload), end="")
    return EXIT_OK
