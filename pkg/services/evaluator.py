"""
Evaluation against individual labels: voter-level ROC AUC, squared count
error per precinct and a reliability table.
"""

import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, List, Mapping, Optional, Protocol, Sequence

import numpy as np
from scipy.stats import rankdata

from core.errors import DomainError
from services.dataset import Dataset, LabeledDataset

logger = logging.getLogger(__name__)

CALIBRATION_BINS = 10


class ProbabilityModel(Protocol):
    kind: str

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        ...


def roc_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Area under the ROC curve (Mann-Whitney statistic; ties count one half)."""
    s = np.asarray(scores, dtype=float).reshape(-1)
    y = np.asarray(labels).reshape(-1)
    if s.shape != y.shape:
        raise DomainError(f"{s.size} scores for {y.size} labels")
    if not np.all((y == 0) | (y == 1)):
        raise DomainError("labels must be 0 or 1")
    n_pos = int(np.count_nonzero(y == 1))
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DomainError("AUC is undefined when only one class is present")
    ranks = rankdata(s)
    u = float(ranks[y == 1].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def stacked_scores(model: ProbabilityModel, data: Dataset) -> np.ndarray:
    if not data.precincts:
        return np.zeros(0)
    return np.asarray(model.predict_proba(data.stacked.X), dtype=float)


def aggregate_sse(model: ProbabilityModel, data: Dataset) -> float:
    """Sum over precincts of (D_i - sum_j p_ij)^2."""
    if not data.precincts:
        return 0.0
    stacked = data.stacked
    mu = stacked.segment_sum(stacked_scores(model, data))
    return float(np.sum((stacked.counts - mu) ** 2))


def calibration_bins(scores: Sequence[float], labels: Sequence[int], bins: int = CALIBRATION_BINS
                     ) -> List[Dict[str, Any]]:
    """Equal-width bins on [0, 1]: mean predicted probability, empirical rate and count per bin."""
    s = np.asarray(scores, dtype=float).reshape(-1)
    y = np.asarray(labels, dtype=float).reshape(-1)
    index = np.minimum((s * bins).astype(int), bins - 1)
    rows = []
    for b in range(bins):
        mask = index == b
        count = int(mask.sum())
        rows.append({
            "lower": b / bins,
            "upper": (b + 1) / bins,
            "count": count,
            "mean_predicted": float(s[mask].mean()) if count else None,
            "empirical_rate": float(y[mask].mean()) if count else None,
        })
    return rows


@dataclass
class EvaluationReport:
    auc: float
    aggregate_sse: float
    n_precincts: int
    n_voters: int
    calibration: List[Dict[str, Any]] = field(default_factory=list)
    method: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "EvaluationReport":
        return cls(auc=float(payload["auc"]), aggregate_sse=float(payload["aggregate_sse"]),
                   n_precincts=int(payload["n_precincts"]), n_voters=int(payload["n_voters"]),
                   calibration=list(payload.get("calibration", [])), method=payload.get("method"))

    def summary(self) -> str:
        return f"AUC: {format_auc(self.auc)}  aggregate SSE: {self.aggregate_sse:.4f}"


def format_auc(auc: float) -> str:
    return f"{100.0 * auc:.1f}%"


def evaluate_run(model: ProbabilityModel, labeled: LabeledDataset, method: Optional[str] = None) -> EvaluationReport:
    """AUC over every voter of the labeled set plus the count error of its precincts."""
    scores = stacked_scores(model, labeled.data)
    labels = labeled.all_labels()
    report = EvaluationReport(
        auc=roc_auc(scores, labels),
        aggregate_sse=aggregate_sse(model, labeled.data),
        n_precincts=len(labeled.data),
        n_voters=labeled.data.n_voters,
        calibration=calibration_bins(scores, labels),
        method=method,
    )
    logger.info(f"Evaluated {method or model.kind} on {report.n_voters} voters: {report.summary()}")
    return report


@dataclass
class ComparisonRow:
    method: str
    auc: Optional[float]
    aggregate_sse: Optional[float]
    note: str = ""


def format_comparison(rows: Sequence[ComparisonRow]) -> str:
    """Plain-text results table, one method per line."""
    width = max([len("method")] + [len(r.method) for r in rows])
    lines = [f"{'method'.ljust(width)}  {'AUC':>7}  {'count SSE':>12}  note"]
    for r in rows:
        auc = format_auc(r.auc) if r.auc is not None else "-"
        sse = f"{r.aggregate_sse:.4f}" if r.aggregate_sse is not None else "-"
        lines.append(f"{r.method.ljust(width)}  {auc:>7}  {sse:>12}  {r.note}".rstrip())
    return "\n".join(lines)


def compare_methods(train: LabeledDataset, holdout: LabeledDataset, fit_config, neural_config=None,
                    methods: Sequence[str] = ("gauss", "gauss-bt", "gauss-bt-exact", "aggregate-lr"),
                    dev_precincts: int = 40, seed: int = 0) -> List[ComparisonRow]:
    """Fit every method on train and score it on holdout, one row per method.

    The first row is logistic regression on the individual labels, a reference
    the aggregate methods cannot see. The network row is added when
    neural_config is given; it tunes on dev_precincts precincts held out of train.
    """
    from services.dataset import split_dev
    from services.neural_net import fit_neural
    from services.optimizer import fit, fit_individual_lr

    reference = fit_individual_lr(train)
    rows = [ComparisonRow("individual-lr", evaluate_run(reference, holdout).auc,
                          aggregate_sse(reference, holdout.data), "uses voter labels")]
    for method in methods:
        model, report = fit(train.data, replace(fit_config, method=method))
        result = evaluate_run(model, holdout, method)
        rows.append(ComparisonRow(method, result.auc, result.aggregate_sse, "diverged" if report.diverged else ""))
    if neural_config is not None:
        fit_part, dev = split_dev(train.data, dev_precincts, seed)
        model, _ = fit_neural(fit_part, dev, neural_config)
        result = evaluate_run(model, holdout, "neural")
        rows.append(ComparisonRow("neural", result.auc, result.aggregate_sse))
    return rows
