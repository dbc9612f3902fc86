"""
Single-hidden-layer network for voter probabilities, trained on the Gaussian
surrogate of the precinct counts.

    h_ij = sigma(W1 x_ij + b1)
    p_ij = sigma(W2 h_ij + b2)

Training runs several seeded restarts of fixed-step gradient ascent, stores the
parameters at the configured checkpoints, and keeps the (restart, checkpoint)
with the smallest squared count error on a development set of precincts.
"""

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from core.errors import ConfigError, DivergenceError, DomainError, EvaluationError
from core.parallel import map_ordered
from services.dataset import Dataset, PrecinctData
from services.evaluator import aggregate_sse
from services.likelihood import PHI2_FLOOR, gaussian_dl_dp, gaussian_loglik_value, gaussian_terms
from services.optimizer import FitReport, IterationRecord

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NeuralModel:
    W1: np.ndarray  # (hidden, p)
    b1: np.ndarray  # (hidden,)
    W2: np.ndarray  # (hidden,)
    b2: float

    kind = "neural"

    def __post_init__(self):
        W1 = np.array(self.W1, dtype=float, ndmin=2)
        b1 = np.array(self.b1, dtype=float).reshape(-1)
        W2 = np.array(self.W2, dtype=float).reshape(-1)
        b2 = float(self.b2)
        hidden = W1.shape[0]
        if hidden < 1 or b1.shape != (hidden,) or W2.shape != (hidden,):
            raise DomainError(f"inconsistent network shapes: W1 {W1.shape}, b1 {b1.shape}, W2 {W2.shape}")
        if not all(np.all(np.isfinite(a)) for a in (W1, b1, W2)) or not np.isfinite(b2):
            raise DomainError("network parameters must be finite")
        for name, value in (("W1", W1), ("b1", b1), ("W2", W2)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "b2", b2)

    @property
    def hidden(self) -> int:
        return int(self.W1.shape[0])

    @property
    def p(self) -> int:
        return int(self.W1.shape[1])

    def hidden_activations(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.p:
            raise DomainError(f"covariates have {X.shape[-1]} columns, network expects {self.p}")
        return expit(X @ self.W1.T + self.b1)

    def output_logits(self, X: np.ndarray) -> np.ndarray:
        return self.hidden_activations(X) @ self.W2 + self.b2

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return expit(self.output_logits(X))

    def ascend(self, grad: "NeuralGradient", lr: float) -> "NeuralModel":
        return NeuralModel(self.W1 + lr * grad.W1, self.b1 + lr * grad.b1, self.W2 + lr * grad.W2,
                           self.b2 + lr * grad.b2)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.W1.ravel(), self.b1, self.W2, [self.b2]])

    @classmethod
    def from_vector(cls, vector: np.ndarray, hidden: int, p: int) -> "NeuralModel":
        vector = np.asarray(vector, dtype=float)
        cut1, cut2, cut3 = hidden * p, hidden * p + hidden, hidden * p + 2 * hidden
        return cls(vector[:cut1].reshape(hidden, p), vector[cut1:cut2], vector[cut2:cut3], vector[cut3])


@dataclass(frozen=True)
class NeuralGradient:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: float

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.W1.ravel(), self.b1, self.W2, [self.b2]])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.to_vector())))


@dataclass
class NeuralFitConfig:
    hidden: int = 10
    lr: float = 2e-6
    restarts: int = 10
    checkpoints: Tuple[int, ...] = (50, 100, 150, 200)
    seed: int = 0
    init_scale: float = 0.1
    phi2_floor: float = PHI2_FLOOR

    def __post_init__(self):
        self.checkpoints = tuple(int(c) for c in self.checkpoints)
        if self.hidden < 1 or self.restarts < 1:
            raise ConfigError("hidden and restarts must be >= 1")
        if not self.checkpoints or list(self.checkpoints) != sorted(set(self.checkpoints)) or self.checkpoints[0] < 0:
            raise ConfigError("checkpoints must be non-empty, non-negative and strictly ascending")
        if self.lr < 0:
            raise ConfigError("lr must be >= 0")

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out["checkpoints"] = list(self.checkpoints)
        return out


def init_neural(hidden: int, p: int, rng: np.random.Generator, scale: float = 0.1) -> NeuralModel:
    """Weights uniform(-scale, scale), biases zero."""
    return NeuralModel(rng.uniform(-scale, scale, size=(hidden, p)), np.zeros(hidden),
                       rng.uniform(-scale, scale, size=hidden), 0.0)


def nn_forward(model: NeuralModel, precinct: PrecinctData) -> np.ndarray:
    return model.predict_proba(precinct.X)


def _surrogate_terms(model: NeuralModel, data: Dataset, floor: float):
    stacked = data.stacked
    H = model.hidden_activations(stacked.X)
    z = H @ model.W2 + model.b2
    p, q = expit(z), expit(-z)
    _, phi2, resid = gaussian_terms(p, q, stacked, data.ids, floor)
    return H, p, q, phi2, resid


def nn_gaussian_loglik(model: NeuralModel, data: Dataset, floor: float = PHI2_FLOOR) -> float:
    _, _, _, phi2, resid = _surrogate_terms(model, data, floor)
    return gaussian_loglik_value(phi2, resid)


def nn_grad(model: NeuralModel, data: Dataset, floor: float = PHI2_FLOOR) -> NeuralGradient:
    """Backpropagation of the Gaussian surrogate through both layers."""
    stacked = data.stacked
    H, p, q, phi2, resid = _surrogate_terms(model, data, floor)
    dl_dp = gaussian_dl_dp(p, phi2, resid, stacked)
    dz = dl_dp * p * q                                    # dl/d(output logit), per voter
    dA = np.outer(dz, model.W2) * H * (1.0 - H)           # dl/d(hidden pre-activation)
    return NeuralGradient(W1=dA.T @ stacked.X, b1=dA.sum(axis=0), W2=H.T @ dz, b2=float(dz.sum()))


@dataclass
class _RestartResult:
    restart: int
    scores: Dict[int, float] = field(default_factory=dict)
    models: Dict[int, NeuralModel] = field(default_factory=dict)
    records: List[IterationRecord] = field(default_factory=list)
    diverged: bool = False
    reason: Optional[str] = None


def _train_restart(restart: int, seed_seq: np.random.SeedSequence, train: Dataset, dev: Dataset,
                   cfg: NeuralFitConfig) -> _RestartResult:
    result = _RestartResult(restart)
    model = init_neural(cfg.hidden, train.p, np.random.default_rng(seed_seq), cfg.init_scale)
    last = cfg.checkpoints[-1]
    phase = f"restart-{restart}"
    try:
        for iteration in range(last + 1):
            if iteration in cfg.checkpoints:
                result.scores[iteration] = aggregate_sse(model, dev)
                result.models[iteration] = model
            if iteration == last:
                break
            grad = nn_grad(model, train, cfg.phi2_floor)
            if not grad.is_finite():
                raise FloatingPointError(f"non-finite gradient at iteration {iteration + 1}")
            model = model.ascend(grad, cfg.lr)
            value = nn_gaussian_loglik(model, train, cfg.phi2_floor)
            if not np.isfinite(value):
                raise FloatingPointError(f"non-finite objective at iteration {iteration + 1}")
            result.records.append(IterationRecord(iteration + 1, value, "approx",
                                                  float(np.linalg.norm(grad.to_vector())), cfg.lr, phase))
    except (FloatingPointError, EvaluationError, DomainError) as e:
        result.diverged = True
        result.reason = str(e)
        logger.warning(f"Neural restart {restart} diverged and is excluded: {e}")
    return result


def fit_neural(train: Dataset, dev: Dataset, cfg: NeuralFitConfig) -> Tuple[NeuralModel, FitReport]:
    """Seeded restarts x checkpoints, selected by squared count error on dev."""
    if not dev.precincts:
        raise DomainError("neural fitting needs a non-empty development set")
    if not train.precincts:
        raise DomainError("cannot fit an empty dataset")
    started = time.perf_counter()
    logger.info(f"Training network (hidden={cfg.hidden}) with {cfg.restarts} restarts on {len(train)} precincts, "
                f"tuning on {len(dev)}")
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    results = map_ordered(lambda r: _train_restart(r, seeds[r], train, dev, cfg), range(cfg.restarts))

    best: Optional[Tuple[float, int, int]] = None
    grid = []
    for res in results:
        row = []
        for checkpoint in cfg.checkpoints:
            score = res.scores.get(checkpoint)
            row.append(None if res.diverged or score is None else float(score))
            if not res.diverged and score is not None and np.isfinite(score):
                if best is None or score < best[0]:
                    best = (float(score), res.restart, checkpoint)
        grid.append(row)

    report = FitReport(method="neural", config=cfg.to_dict())
    for res in results:
        report.records.extend(res.records)
        if res.diverged:
            report.events.append({"restart": res.restart, "event": "restart diverged", "reason": res.reason})
    report.extras = {
        "checkpoints": list(cfg.checkpoints),
        "dev_scores": grid,
        "excluded_restarts": [res.restart for res in results if res.diverged],
    }
    report.wall_time = time.perf_counter() - started

    if best is None:
        report.diverged = True
        report.divergence_reason = "all restarts diverged"
        raise DivergenceError("all neural restarts diverged")

    score, restart, checkpoint = best
    model = results[restart].models[checkpoint]
    report.extras["selected"] = {"restart": restart, "iteration": checkpoint, "dev_sse": score}
    report.beta = []
    logger.info(f"Selected restart {restart} at iteration {checkpoint} (dev SSE {score:.4f})")
    return model, report
