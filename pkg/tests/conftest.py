import sys
import os
import pytest
import numpy as np

# Ensure project root is on sys.path so tests can import application modules
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from core.parallel import set_max_workers
from services.dataset import Dataset


@pytest.fixture(autouse=True)
def single_thread():
    # tests that want a pool set it themselves
    set_max_workers(1)
    yield
    set_max_workers(1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_dataset():
    """Five seeded precincts of 4..10 voters, intercept plus two covariates."""
    gen = np.random.default_rng(2024)
    blocks, counts = [], []
    for _ in range(5):
        size = int(gen.integers(4, 11))
        blocks.append(gen.normal(0.0, 1.0, size=(size, 2)) + gen.normal(0.0, 0.5, size=2))
        counts.append(int(gen.integers(1, size)))
    return Dataset.from_arrays(blocks, counts, add_intercept=True, feature_names=["x1", "x2"])


@pytest.fixture
def separable_dataset():
    """Two precincts that a single direction splits perfectly (no intercept)."""
    return Dataset.from_arrays(
        [[[1.0, 0.0], [-1.0, 0.0]], [[0.0, 1.0], [0.0, -1.0]]],
        [1, 1],
        ids=["a", "b"],
    )


@pytest.fixture
def nonconcave_dataset():
    """At beta = 0 the exact Hessian is diag(0.5, -0.25)."""
    return Dataset.from_arrays([[[1.0, 0.0], [-1.0, 0.0]], [[0.0, 1.0]]], [1, 1], ids=["a", "b"])


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(str(v) for v in row) + "\n")
    return str(path)
