import numpy as np
import pytest

from core.errors import DomainError
from services.dataset import Dataset, LabeledDataset, split_dev
from services.evaluator import (
    ComparisonRow,
    EvaluationReport,
    aggregate_sse,
    calibration_bins,
    compare_methods,
    evaluate_run,
    format_auc,
    format_comparison,
    roc_auc,
)
from services.likelihood import LogitModel
from services.neural_net import NeuralFitConfig
from services.optimizer import FitConfig
from services.simulator import SimConfig, simulate


def test_auc_examples():
    assert roc_auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75
    assert roc_auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert roc_auc([0.5, 0.5, 0.5, 0.5], [0, 1, 0, 1]) == 0.5


def test_auc_depends_only_on_ranks(rng):
    scores = rng.uniform(size=200)
    labels = (rng.uniform(size=200) < scores).astype(int)
    auc = roc_auc(scores, labels)
    assert roc_auc(np.log(scores / (1 - scores)), labels) == pytest.approx(auc, abs=1e-15)
    assert roc_auc(1.0 - scores, labels) == pytest.approx(1.0 - auc, abs=1e-12)


@pytest.mark.parametrize("scores,labels", [
    ([0.2, 0.3], [1, 1]),
    ([0.2, 0.3, 0.4], [0, 1]),
    ([0.2, 0.3], [0, 2]),
])
def test_auc_domain_errors(scores, labels):
    with pytest.raises(DomainError):
        roc_auc(scores, labels)


def test_aggregate_sse_examples():
    X = np.ones((4, 1))
    assert aggregate_sse(LogitModel([0.0]), Dataset.from_arrays([X], [4])) == 4.0
    assert aggregate_sse(LogitModel([0.0]), Dataset.from_arrays([X], [2])) == 0.0
    assert aggregate_sse(LogitModel([0.0]), Dataset.from_arrays([X, X], [4, 0])) == 8.0


def test_calibration_bins():
    rows = calibration_bins([0.05, 0.15, 0.95, 1.0], [0, 1, 1, 1])
    assert len(rows) == 10
    assert [r["count"] for r in rows] == [1, 1, 0, 0, 0, 0, 0, 0, 0, 2]
    assert rows[9]["mean_predicted"] == pytest.approx(0.975)
    assert rows[9]["empirical_rate"] == 1.0
    assert rows[4]["mean_predicted"] is None


def test_format_auc():
    assert format_auc(1.0) == "100.0%"
    assert format_auc(0.7564) == "75.6%"


def test_evaluate_run_and_report_round_trip():
    data = Dataset.from_arrays([np.array([[1.0, -1.0], [1.0, 0.5], [1.0, 2.0]]), np.array([[1.0, 0.0], [1.0, 1.0]])],
                               [2, 1])
    labeled = LabeledDataset(data, (np.array([0, 1, 1]), np.array([0, 1])))
    report = evaluate_run(LogitModel([0.0, 1.0]), labeled, method="gauss")
    assert report.auc == 1.0
    assert (report.n_precincts, report.n_voters) == (2, 5)
    assert report.summary().startswith("AUC: 100.0%")
    again = EvaluationReport.from_dict(report.to_dict())
    assert again == report


def test_format_comparison():
    text = format_comparison([ComparisonRow("individual-lr", 0.8123, 12.5, "uses voter labels"),
                              ComparisonRow("gauss", None, None, "diverged")])
    lines = text.splitlines()
    assert lines[0].startswith("method")
    assert "81.2%" in lines[1] and lines[1].endswith("uses voter labels")
    assert lines[2].split()[:3] == ["gauss", "-", "-"]


def test_compare_methods_rows():
    sim = simulate(SimConfig(n_precincts=40, voters_per_precinct=30, p=2, seed=12))
    train, held = split_dev(sim.data, 10, seed=12)
    rows = compare_methods(
        sim.labeled.subset(train.ids), sim.labeled.subset(held.ids),
        FitConfig(lr=1e-4, iters_total=20, iters_phase1=5, iters_phase3=5),
        NeuralFitConfig(hidden=3, lr=1e-4, restarts=2, checkpoints=(0, 5)),
        methods=("gauss", "aggregate-lr"), dev_precincts=5,
    )
    assert [r.method for r in rows] == ["individual-lr", "gauss", "aggregate-lr", "neural"]
    assert rows[0].note == "uses voter labels"
    assert all(0.0 <= r.auc <= 1.0 for r in rows)


@pytest.mark.slow
def test_method_ordering_on_anisotropic_precincts():
    # unequal between-precinct spread distorts the fractional-label fit's direction
    sim = simulate(SimConfig(n_precincts=500, voters_per_precinct=100, p=2, beta_true=[-0.3, 1.5, 1.5],
                             precinct_shift_scale=[1.0, 0.5], seed=5))
    train, held = split_dev(sim.data, 100, seed=5)
    rows = compare_methods(sim.labeled.subset(train.ids), sim.labeled.subset(held.ids), FitConfig(),
                           NeuralFitConfig(), dev_precincts=40, seed=5)
    auc = {r.method: r.auc for r in rows}
    assert auc["gauss"] > auc["aggregate-lr"]
    assert auc["gauss"] > auc["neural"]
    logit = [auc["gauss"], auc["gauss-bt"], auc["gauss-bt-exact"]]
    assert max(logit) - min(logit) < 0.005


def test_aggregate_sse_ignores_voter_order(rng):
    blocks = [rng.normal(size=(size, 2)) for size in (7, 12, 20)]
    counts = [3, 5, 14]
    model = LogitModel([0.4, -0.9])
    base = aggregate_sse(model, Dataset.from_arrays(blocks, counts))
    shuffled = Dataset.from_arrays([b[rng.permutation(len(b))] for b in blocks], counts)
    assert aggregate_sse(model, shuffled) == pytest.approx(base, rel=1e-12)
