#!/usr/bin/env python3
"""
Random search for a small instance whose exact log-likelihood Hessian has
eigenvalues of both signs. Prints the instance as JSON so it can be frozen as
a test fixture.

    python scripts/search_nonconcave.py --budget 10000 --seed 0
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from services.diagnostics import find_nonconcave_instance  # noqa: E402
from utils.files import dumps_json  # noqa: E402


def main():
    parser = argparse.ArgumentParser(description="search for a mixed-curvature instance")
    parser.add_argument("--budget", type=int, default=10_000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    found = find_nonconcave_instance(args.budget, args.seed)
    if found is None:
        print(f"[search] nothing found in {args.budget} draws")
        sys.exit(1)
    print(f"[search] found after {found.draws} draws")
    print(dumps_json({
        "beta": found.beta,
        "eigenvalues": found.eigenvalues,
        "precincts": [{"X": pr.X, "D": pr.D} for pr in found.data],
    }), end="")


if __name__ == "__main__":
    main()
