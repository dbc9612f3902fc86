"""
Fitting schedules for the logistic model.

- gauss:          fixed-step ascent on the Gaussian surrogate for every iteration.
- gauss-bt:       fixed steps for phase 1, then the surrogate gradient as the
                  direction with a backtracking line search on the exact likelihood.
- gauss-bt-exact: as gauss-bt, but the last iters_phase3 iterations use the exact
                  gradient as the direction.
- aggregate-lr:   logistic regression with every voter given the precinct rate
                  D_i/|S_i| as a fractional label (concave surrogate baseline).

Every run returns (LogitModel, FitReport). Non-finite values or an undefined
objective abort the run and return the report up to the failure with the
divergence flag set.
"""

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit, log_expit
from sklearn.linear_model import LogisticRegression

from core.errors import ConfigError, DomainError, EvaluationError
from services.dataset import Dataset, LabeledDataset
from services.likelihood import (
    PHI2_FLOOR,
    LogitModel,
    approx_grad,
    approx_loglik,
    exact_grad,
    exact_loglik,
)

logger = logging.getLogger(__name__)

METHODS = ("gauss", "gauss-bt", "gauss-bt-exact", "aggregate-lr")
# approx: Gaussian surrogate; exact: Poisson binomial; surrogate: aggregate-lr fractional-label objective
OBJECTIVE_KINDS = ("approx", "exact", "surrogate")


@dataclass
class FitConfig:
    method: str = "gauss"
    iters_total: int = 120
    iters_phase1: int = 10
    iters_phase3: int = 10
    lr: float = 2e-5
    bt_shrink: float = 0.5
    bt_armijo: float = 1e-4
    bt_max_halvings: int = 30
    bt_init_scale: float = 1.0
    bt_growth: float = 2.0
    phi2_floor: float = PHI2_FLOOR
    seed: int = 0
    init_beta: Optional[Sequence[float]] = None
    divergence_window: int = 10
    grad_tol: float = 1e-6
    beta_limit: float = 1e3
    agg_iters: int = 1000

    def __post_init__(self):
        problems = []
        if self.method not in METHODS:
            problems.append(f"unknown method '{self.method}'")
        if self.lr < 0:
            problems.append("lr must be >= 0")
        if min(self.iters_total, self.iters_phase1, self.iters_phase3, self.agg_iters) < 0:
            problems.append("iteration counts must be >= 0")
        if self.iters_phase1 + self.iters_phase3 > self.iters_total:
            problems.append("iters_phase1 + iters_phase3 must not exceed iters_total")
        if not 0 < self.bt_shrink < 1 or not 0 < self.bt_armijo < 1:
            problems.append("bt_shrink and bt_armijo must be in (0, 1)")
        if self.bt_max_halvings < 0:
            problems.append("bt_max_halvings must be >= 0")
        if self.bt_init_scale <= 0 or self.bt_growth < 1:
            problems.append("bt_init_scale must be > 0 and bt_growth >= 1")
        if problems:
            raise ConfigError("; ".join(problems))

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        if self.init_beta is not None:
            out["init_beta"] = [float(v) for v in self.init_beta]
        return out


@dataclass
class IterationRecord:
    iteration: int
    objective: float
    objective_kind: str
    grad_norm: float
    step: float
    phase: str
    halvings: int = 0


@dataclass
class FitReport:
    method: str
    records: List[IterationRecord] = field(default_factory=list)
    beta: List[float] = field(default_factory=list)
    initial_objective: Optional[float] = None
    diverged: bool = False
    divergence_reason: Optional[str] = None
    converged: Optional[bool] = None
    events: List[Dict[str, Any]] = field(default_factory=list)
    config: Dict[str, Any] = field(default_factory=dict)
    extras: Dict[str, Any] = field(default_factory=dict)
    wall_time: float = 0.0

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def final_objective(self) -> Optional[float]:
        return self.records[-1].objective if self.records else self.initial_objective

    def phase_records(self, phase: str) -> List[IterationRecord]:
        return [r for r in self.records if r.phase == phase]

    def to_dict(self, include_timing: bool = False) -> Dict[str, Any]:
        out = asdict(self)
        if not include_timing:
            out.pop("wall_time")
        return out


@dataclass
class StepResult:
    step: float
    beta: np.ndarray
    value: float
    halvings: int
    accepted: bool


def backtracking_step(objective: Callable[[np.ndarray], float], beta: np.ndarray, direction: np.ndarray,
                      f0: float, t0: float, shrink: float = 0.5, armijo: float = 1e-4,
                      max_halvings: int = 30, floor_step: float = 0.0) -> StepResult:
    """Armijo backtracking along an ascent direction.

    Accepts the first t in t0, t0*shrink, ... (at most max_halvings shrinks)
    with objective(beta + t*d) >= f0 + armijo * t * |d|^2. When nothing is
    accepted the step is 0 and beta is returned unchanged, unless floor_step
    is positive, in which case that step is taken instead.
    A zero direction is a stationary point and is accepted with step 0.
    """
    slope = float(direction @ direction)
    if slope == 0.0:
        return StepResult(0.0, beta, f0, 0, True)
    t = t0
    for halvings in range(max_halvings + 1):
        candidate = beta + t * direction
        try:
            value = objective(candidate)
        except EvaluationError:
            value = -np.inf
        if np.isfinite(value) and value >= f0 + armijo * t * slope:
            return StepResult(t, candidate, float(value), halvings, True)
        t *= shrink
        if floor_step and t < floor_step:
            break
    if floor_step:
        candidate = beta + floor_step * direction
        return StepResult(floor_step, candidate, float(objective(candidate)), halvings, True)
    return StepResult(0.0, beta, f0, max_halvings, False)


def _initial_beta(data: Dataset, cfg: FitConfig) -> np.ndarray:
    if cfg.init_beta is None:
        return np.zeros(data.p)
    beta = np.asarray(cfg.init_beta, dtype=float)
    if beta.shape != (data.p,):
        raise DomainError(f"init_beta has {beta.size} entries, dataset has p={data.p}")
    return beta.copy()


@dataclass
class _Phase:
    name: str
    iterations: int
    direction: Callable[[np.ndarray], np.ndarray]
    objective: Callable[[np.ndarray], float]
    kind: str
    backtracking: bool


def _phases(data: Dataset, cfg: FitConfig) -> List[_Phase]:
    floor = cfg.phi2_floor

    def surrogate_grad(beta):
        return approx_grad(LogitModel(beta), data, floor)

    def surrogate(beta):
        return approx_loglik(LogitModel(beta), data, floor)

    def true_grad(beta):
        return exact_grad(LogitModel(beta), data)

    def true_loglik(beta):
        return exact_loglik(LogitModel(beta), data)

    if cfg.method == "gauss":
        return [_Phase("fixed", cfg.iters_total, surrogate_grad, surrogate, "approx", False)]
    phase1 = _Phase("fixed", cfg.iters_phase1, surrogate_grad, surrogate, "approx", False)
    if cfg.method == "gauss-bt":
        return [phase1, _Phase("backtrack", cfg.iters_total - cfg.iters_phase1, surrogate_grad, true_loglik,
                               "exact", True)]
    middle = cfg.iters_total - cfg.iters_phase1 - cfg.iters_phase3
    return [
        phase1,
        _Phase("backtrack", middle, surrogate_grad, true_loglik, "exact", True),
        _Phase("exact", cfg.iters_phase3, true_grad, true_loglik, "exact", True),
    ]


def _run_schedule(data: Dataset, cfg: FitConfig) -> Tuple[LogitModel, FitReport]:
    if not data.precincts:
        raise DomainError("cannot fit an empty dataset")
    started = time.perf_counter()
    report = FitReport(method=cfg.method, config=cfg.to_dict())
    beta = _initial_beta(data, cfg)
    logger.info(f"Fitting {cfg.method} on {len(data)} precincts (p={data.p}, {cfg.iters_total} iterations)")

    iteration = 0
    current_kind = None
    current_value = None
    decreases = 0
    last_step = 0.0
    try:
        for phase in _phases(data, cfg):
            if phase.iterations == 0:
                continue
            if phase.kind != current_kind:
                current_value = phase.objective(beta)
                current_kind = phase.kind
                if report.initial_objective is None:
                    report.initial_objective = current_value
                report.events.append({"iteration": iteration, "phase": phase.name, "event": "phase start",
                                      "objective": current_value, "objective_kind": phase.kind})
            for _ in range(phase.iterations):
                iteration += 1
                direction = phase.direction(beta)
                grad_norm = float(np.linalg.norm(direction))
                if not np.all(np.isfinite(direction)):
                    raise FloatingPointError(f"non-finite gradient at iteration {iteration}")

                if phase.backtracking:
                    # trial step: lr * bt_init_scale, or the last accepted step grown by bt_growth
                    t0 = max(cfg.lr * cfg.bt_init_scale, last_step * cfg.bt_growth)
                    result = backtracking_step(phase.objective, beta, direction, current_value, t0,
                                               cfg.bt_shrink, cfg.bt_armijo, cfg.bt_max_halvings)
                    last_step = result.step
                    if not result.accepted:
                        logger.warning(f"{cfg.method}: no step accepted at iteration {iteration}; beta unchanged")
                        report.events.append({"iteration": iteration, "phase": phase.name,
                                              "event": "no step accepted", "halvings": result.halvings})
                    beta, value, step, halvings = result.beta, result.value, result.step, result.halvings
                else:
                    beta = beta + cfg.lr * direction
                    value, step, halvings = phase.objective(beta), cfg.lr, 0

                if not np.isfinite(value) or not np.all(np.isfinite(beta)):
                    raise FloatingPointError(f"non-finite objective at iteration {iteration}")
                decreases = decreases + 1 if value < current_value else 0
                current_value = value
                report.records.append(IterationRecord(iteration, float(value), phase.kind, grad_norm,
                                                      float(step), phase.name, int(halvings)))
                logger.debug(f"{cfg.method} it={iteration} {phase.kind}={value:.6f} |g|={grad_norm:.3e} t={step:.3e}")

                if decreases >= cfg.divergence_window:
                    raise FloatingPointError(f"objective decreased for {decreases} consecutive iterations")
    except (FloatingPointError, EvaluationError) as e:
        report.diverged = True
        report.divergence_reason = str(e)
        logger.error(f"{cfg.method} aborted at iteration {iteration}: {e}")

    report.beta = [float(v) for v in beta]
    report.wall_time = time.perf_counter() - started
    logger.info(f"{cfg.method} finished after {report.iterations} iterations "
                f"(objective {report.final_objective}, diverged={report.diverged})")
    return LogitModel(beta), report


def fit_gauss(data: Dataset, cfg: FitConfig) -> Tuple[LogitModel, FitReport]:
    """Fixed-step ascent on the Gaussian surrogate for iters_total iterations."""
    return _run_schedule(data, _with_method(cfg, "gauss"))


def fit_gauss_bt(data: Dataset, cfg: FitConfig) -> Tuple[LogitModel, FitReport]:
    """Surrogate direction, step chosen by backtracking on the exact likelihood."""
    return _run_schedule(data, _with_method(cfg, "gauss-bt"))


def fit_gauss_bt_exact(data: Dataset, cfg: FitConfig) -> Tuple[LogitModel, FitReport]:
    """As fit_gauss_bt, with the exact gradient for the final iters_phase3 iterations."""
    return _run_schedule(data, _with_method(cfg, "gauss-bt-exact"))


def _with_method(cfg: FitConfig, method: str) -> FitConfig:
    if cfg.method == method:
        return cfg
    values = asdict(cfg)
    values["method"] = method
    values["init_beta"] = cfg.init_beta
    return FitConfig(**values)


def aggregate_surrogate(beta: np.ndarray, X: np.ndarray, rates: np.ndarray) -> float:
    z = X @ beta
    return float(np.sum(rates * log_expit(z) + (1.0 - rates) * log_expit(-z)))


def fit_aggregate_lr(data: Dataset, cfg: FitConfig) -> Tuple[LogitModel, FitReport]:
    """Logistic regression on fractional labels D_i/|S_i| (concave; gradient ascent with backtracking)."""
    if not data.precincts:
        raise DomainError("cannot fit an empty dataset")
    cfg = _with_method(cfg, "aggregate-lr")
    started = time.perf_counter()
    stacked = data.stacked
    X = stacked.X
    rates = stacked.expand(stacked.counts / stacked.sizes)
    report = FitReport(method=cfg.method, config=cfg.to_dict(), converged=False)

    def objective(b):
        return aggregate_surrogate(b, X, rates)

    # the surrogate's Hessian is bounded by X^T X / 4, so 4 / lambda_max always ascends
    lam = float(np.linalg.eigvalsh(X.T @ X)[-1])
    safe_step = 4.0 / lam if lam > 0 else 1.0
    step = 1.0

    beta = _initial_beta(data, cfg)
    value = objective(beta)
    report.initial_objective = value
    logger.info(f"Fitting aggregate-lr on {len(data)} precincts ({stacked.X.shape[0]} voters)")
    for iteration in range(1, cfg.agg_iters + 1):
        grad = X.T @ (rates - expit(X @ beta))
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm < cfg.grad_tol:
            report.converged = True
            break
        result = backtracking_step(objective, beta, grad, value, max(step * 1.25, safe_step), cfg.bt_shrink,
                                   cfg.bt_armijo, cfg.bt_max_halvings, floor_step=safe_step)
        beta, value, step = result.beta, result.value, result.step
        report.records.append(IterationRecord(iteration, value, "surrogate", grad_norm, step, "backtrack",
                                              result.halvings))
        if not np.isfinite(value) or np.max(np.abs(beta)) > cfg.beta_limit:
            report.diverged = True
            report.divergence_reason = f"|beta|_inf exceeded {cfg.beta_limit:g} (separation in the surrogate)"
            logger.error(f"aggregate-lr: {report.divergence_reason}")
            break
    else:
        grad_norm = float(np.linalg.norm(X.T @ (rates - expit(X @ beta))))
        report.converged = grad_norm < cfg.grad_tol

    report.beta = [float(v) for v in beta]
    report.wall_time = time.perf_counter() - started
    logger.info(f"aggregate-lr finished after {report.iterations} iterations (converged={report.converged})")
    return LogitModel(beta), report


def fit_individual_lr(labeled: LabeledDataset) -> LogitModel:
    """Logistic regression on the individual labels (reference baseline; needs labels)."""
    X = labeled.data.stacked.X
    y = labeled.all_labels()
    if np.unique(y).size < 2:
        raise DomainError("individual-label baseline needs both outcomes present")
    estimator = LogisticRegression(penalty=None, fit_intercept=False, max_iter=2000, tol=1e-10)
    estimator.fit(X, y)
    return LogitModel(estimator.coef_.ravel())


def find_ascent_lr(data: Dataset, lr: float, max_halvings: int = 30,
                   floor: float = PHI2_FLOOR) -> Optional[float]:
    """Largest lr * 2^-k (k <= max_halvings) whose first fixed step from 0 raises the surrogate."""
    start = LogitModel.zeros(data.p)
    f0 = approx_loglik(start, data, floor)
    grad = approx_grad(start, data, floor)
    for _ in range(max_halvings + 1):
        try:
            if approx_loglik(LogitModel(lr * grad), data, floor) > f0:
                return lr
        except EvaluationError:
            pass
        lr *= 0.5
    return None


FITTERS: Dict[str, Callable[[Dataset, FitConfig], Tuple[LogitModel, FitReport]]] = {
    "gauss": fit_gauss,
    "gauss-bt": fit_gauss_bt,
    "gauss-bt-exact": fit_gauss_bt_exact,
    "aggregate-lr": fit_aggregate_lr,
}


def fit(data: Dataset, cfg: FitConfig) -> Tuple[LogitModel, FitReport]:
    """Dispatch on cfg.method."""
    return FITTERS[cfg.method](data, cfg)
