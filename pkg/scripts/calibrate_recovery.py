#!/usr/bin/env python3
"""
Monte Carlo calibration of the parameter-recovery threshold.

Fits the Gaussian-gradient logit model on simulated elections (400 precincts
of 100 voters, 5 precinct-shifted covariates) for a range of seeds and reports
the 95th percentile of max |beta_hat - beta_true|. The value frozen in
tests/test_optimizer.py was taken from this output, rounded up.

    python scripts/calibrate_recovery.py --seeds 20
"""

import argparse
import os
import sys

import numpy as np

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from services.optimizer import FitConfig, fit_gauss  # noqa: E402
from services.simulator import SimConfig, simulate  # noqa: E402


def recovery_error(seed: int) -> float:
    sim = simulate(SimConfig(n_precincts=400, voters_per_precinct=100, p=5, seed=seed))
    model, report = fit_gauss(sim.data, FitConfig())
    if report.diverged:
        print(f"[calibrate] seed {seed}: diverged ({report.divergence_reason})")
        return float("inf")
    return float(np.max(np.abs(model.beta - sim.beta_true)))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    parser.add_argument("--seeds", type=int, default=20)
    parser.add_argument("--first-seed", type=int, default=0)
    args = parser.parse_args()

    errors = []
    for seed in range(args.first_seed, args.first_seed + args.seeds):
        errors.append(recovery_error(seed))
        print(f"[calibrate] seed {seed}: max abs error {errors[-1]:.4f}")
    print(f"[calibrate] 95th percentile over {len(errors)} seeds: {np.percentile(errors, 95):.4f}")


if __name__ == "__main__":
    main()
