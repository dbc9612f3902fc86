import math

import numpy as np
import pytest

from core.errors import ConfigError, DivergenceError, DomainError
from core.parallel import set_max_workers
from services.dataset import Dataset, split_dev
from services.evaluator import aggregate_sse
from services.likelihood import finite_difference_grad, relative_error
from services.neural_net import (
    NeuralFitConfig,
    NeuralGradient,
    NeuralModel,
    fit_neural,
    init_neural,
    nn_forward,
    nn_gaussian_loglik,
    nn_grad,
)
from services.simulator import SimConfig, simulate


@pytest.fixture(scope="module")
def split():
    sim = simulate(SimConfig(n_precincts=30, voters_per_precinct=20, p=2, seed=4))
    return split_dev(sim.data, 10, seed=4)


def test_gradient_matches_finite_differences(small_dataset):
    hidden, p = 4, small_dataset.p
    for seed in range(5):
        model = init_neural(hidden, p, np.random.default_rng(seed), scale=0.5)
        analytic = nn_grad(model, small_dataset).to_vector()
        numeric = finite_difference_grad(
            lambda v: nn_gaussian_loglik(NeuralModel.from_vector(v, hidden, p), small_dataset), model.to_vector()
        )
        assert relative_error(analytic, numeric) < 1e-5


def test_vector_layout_round_trips():
    model = init_neural(3, 2, np.random.default_rng(1))
    again = NeuralModel.from_vector(model.to_vector(), 3, 2)
    assert np.array_equal(again.W1, model.W1) and np.array_equal(again.W2, model.W2)
    assert model.to_vector().size == 3 * 2 + 3 + 3 + 1


def test_forward_pass_is_a_probability(small_dataset):
    model = init_neural(5, small_dataset.p, np.random.default_rng(2), scale=2.0)
    for pr in small_dataset:
        p = nn_forward(model, pr)
        assert p.shape == (pr.size,)
        assert np.all((p > 0) & (p < 1))


def test_zero_output_weights_give_one_half():
    model = NeuralModel(np.ones((2, 3)), np.zeros(2), np.zeros(2), 0.0)
    assert model.predict_proba(np.ones((4, 3))).tolist() == [0.5] * 4


def test_model_validation():
    with pytest.raises(DomainError):
        NeuralModel(np.ones((2, 3)), np.zeros(3), np.zeros(2), 0.0)
    with pytest.raises(DomainError):
        NeuralModel(np.ones((2, 3)), np.zeros(2), np.array([np.inf, 0.0]), 0.0)
    with pytest.raises(DomainError):
        init_neural(2, 3, np.random.default_rng(0)).predict_proba(np.ones((1, 4)))


def test_config_validation():
    with pytest.raises(ConfigError):
        NeuralFitConfig(hidden=0)
    with pytest.raises(ConfigError):
        NeuralFitConfig(checkpoints=(100, 50))
    with pytest.raises(ConfigError):
        NeuralFitConfig(checkpoints=())


def test_checkpoint_grid_and_selection(split):
    train, dev = split
    cfg = NeuralFitConfig(hidden=4, lr=1e-3, restarts=3, checkpoints=(0, 5, 10), seed=7)
    model, report = fit_neural(train, dev, cfg)
    grid = report.extras["dev_scores"]
    assert len(grid) == 3 and all(len(row) == 3 for row in grid)
    selected = report.extras["selected"]
    assert selected["dev_sse"] == min(v for row in grid for v in row)
    assert aggregate_sse(model, dev) == pytest.approx(selected["dev_sse"])
    assert report.method == "neural"
    assert report.iterations == 3 * 10
    assert report.extras["excluded_restarts"] == []


def test_checkpoint_zero_returns_initial_weights(split):
    train, dev = split
    cfg = NeuralFitConfig(hidden=3, restarts=2, checkpoints=(0,), seed=11)
    model, report = fit_neural(train, dev, cfg)
    restart = report.extras["selected"]["restart"]
    seeds = np.random.SeedSequence(11).spawn(2)
    initial = init_neural(3, train.p, np.random.default_rng(seeds[restart]), cfg.init_scale)
    assert np.array_equal(model.to_vector(), initial.to_vector())


def test_training_is_reproducible_across_thread_counts(split):
    train, dev = split
    cfg = NeuralFitConfig(hidden=3, lr=1e-3, restarts=3, checkpoints=(4, 8), seed=5)
    serial, _ = fit_neural(train, dev, cfg)
    set_max_workers(3)
    parallel, _ = fit_neural(train, dev, cfg)
    assert np.array_equal(serial.to_vector(), parallel.to_vector())


def test_all_restarts_diverging_raises(split, mocker):
    train, dev = split
    nan = NeuralGradient(np.full((2, train.p), np.nan), np.zeros(2), np.zeros(2), 0.0)
    mocker.patch("services.neural_net.nn_grad", return_value=nan)
    with pytest.raises(DivergenceError):
        fit_neural(train, dev, NeuralFitConfig(hidden=2, restarts=2, checkpoints=(3,)))


def test_empty_dev_set_is_rejected(split):
    train, _ = split
    empty = Dataset(precincts=())
    with pytest.raises(DomainError):
        fit_neural(train, empty, NeuralFitConfig(restarts=1, checkpoints=(1,)))


def test_gradient_vanishes_at_one_half_and_balanced_counts(rng):
    data = Dataset.from_arrays([rng.normal(size=(size, 2)) for size in (6, 8, 12)], [3, 4, 6])
    model = NeuralModel(rng.normal(size=(3, 2)), rng.normal(size=3), np.zeros(3), 0.0)
    assert np.array_equal(nn_grad(model, data).to_vector(), np.zeros(3 * 2 + 3 + 3 + 1))


def test_single_hidden_unit_by_hand():
    model = NeuralModel([[0.7, -1.2]], [0.3], [2.5], -0.4)
    x = [1.1, 0.6]
    h = 1.0 / (1.0 + math.exp(-(0.7 * 1.1 - 1.2 * 0.6 + 0.3)))
    expected = 1.0 / (1.0 + math.exp(-(2.5 * h - 0.4)))
    precinct = Dataset.from_arrays([[x]], [1]).precincts[0]
    assert nn_forward(model, precinct)[0] == pytest.approx(expected, rel=1e-14)


def test_forward_pass_follows_voter_order(rng):
    model = init_neural(4, 3, rng, scale=1.0)
    X = rng.normal(size=(9, 3))
    order = rng.permutation(9)
    original = Dataset.from_arrays([X], [4]).precincts[0]
    shuffled = Dataset.from_arrays([X[order]], [4]).precincts[0]
    np.testing.assert_allclose(nn_forward(model, shuffled), nn_forward(model, original)[order], rtol=1e-14)
