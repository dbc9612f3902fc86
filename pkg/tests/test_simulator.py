import json
import os

import numpy as np
import pytest
from scipy.stats import binom, kstest

from core.errors import ConfigError
from services.simulator import SimConfig, simulate, write_simulation


def test_zero_coefficients_give_coin_flips():
    sim = simulate(SimConfig(n_precincts=200, voters_per_precinct=100, p=3, beta_true=[0.0] * 4, seed=1))
    assert sim.labeled.all_labels().mean() == pytest.approx(0.5, abs=0.02)


def test_large_intercept_saturates_every_precinct():
    sim = simulate(SimConfig(n_precincts=20, voters_per_precinct=(3, 9), p=2, beta_true=[50.0, 0.0, 0.0], seed=2))
    assert [pr.D for pr in sim.data] == [pr.size for pr in sim.data]


def test_same_config_same_dataset():
    cfg = SimConfig(n_precincts=15, voters_per_precinct=(2, 6), p=3, seed=9)
    a, b = simulate(cfg), simulate(cfg)
    assert np.array_equal(a.beta_true, b.beta_true)
    for pa, pb in zip(a.data, b.data):
        assert np.array_equal(pa.X, pb.X) and pa.D == pb.D
    assert np.array_equal(a.labeled.all_labels(), b.labeled.all_labels())
    other = simulate(SimConfig(n_precincts=15, voters_per_precinct=(2, 6), p=3, seed=10))
    assert not np.array_equal(a.data.stacked.X, other.data.stacked.X) or a.data.n_voters != other.data.n_voters


def test_layout_and_identifiers():
    sim = simulate(SimConfig(n_precincts=12, voters_per_precinct=(3, 7), p=2, seed=3))
    assert sim.data.feature_names == ("intercept", "x1", "x2")
    assert sim.data.ids[0] == "p0001" and sim.data.ids[-1] == "p0012"
    assert sim.data.precincts[0].voter_ids[0] == "v000001"
    assert all(3 <= pr.size <= 7 for pr in sim.data)
    assert np.all(sim.data.stacked.X[:, 0] == 1.0)
    assert np.all((sim.beta_true >= -1.0) & (sim.beta_true <= 1.0))
    for pr, y in zip(sim.data, sim.labeled.labels):
        assert int(y.sum()) == pr.D


def test_shift_scale_controls_between_precinct_spread():
    sim = simulate(SimConfig(n_precincts=300, voters_per_precinct=50, p=2, precinct_shift_scale=[2.0, 0.0], seed=4))
    means = np.array([pr.X[:, 1:].mean(axis=0) for pr in sim.data])
    spread = means.var(axis=0)
    assert spread[0] > 2.0
    assert spread[1] < 0.1


def test_counts_follow_binomial_for_iid_covariates_and_zero_beta():
    sim = simulate(SimConfig(n_precincts=1000, voters_per_precinct=200, p=2, beta_true=[0.0] * 3,
                             covariate_scheme="iid-normal", seed=6))
    counts = np.array([pr.D for pr in sim.data], dtype=float)
    jittered = counts + np.random.default_rng(60).uniform(-0.5, 0.5, size=counts.size)

    def cdf(x):
        k = np.floor(np.asarray(x) + 0.5)
        return binom.cdf(k - 1, 200, 0.5) + (x - k + 0.5) * binom.pmf(k, 200, 0.5)

    assert kstest(jittered, cdf).pvalue > 0.01


@pytest.mark.parametrize("kwargs", [
    {"beta_true": [0.0, 1.0]},
    {"beta_true": "zeros"},
    {"covariate_scheme": "uniform"},
    {"voters_per_precinct": (5, 2)},
    {"voters_per_precinct": 0},
    {"precinct_shift_scale": -1.0},
    {"precinct_shift_scale": [1.0, 2.0]},
    {"n_precincts": 0},
])
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        SimConfig(p=3, **kwargs)


def test_write_simulation(tmp_path):
    sim = simulate(SimConfig(n_precincts=4, voters_per_precinct=3, p=1, beta_true=[0.5, -1.0], seed=8))
    paths = write_simulation(sim, str(tmp_path))
    assert sorted(paths) == ["counts", "labels", "truth", "voters"]
    assert all(os.path.isfile(path) for path in paths.values())
    with open(paths["truth"], encoding="utf-8") as f:
        truth = json.load(f)
    assert truth["beta_true"] == [0.5, -1.0]
    assert truth["feature_names"] == ["intercept", "x1"]
    assert truth["config"]["seed"] == 8
