"""
Log-likelihood, gradients and Hessians for the logistic parameterization.

Two objectives are provided:

- exact: sum over precincts of log Pr(D_i) under the Poisson binomial law;
- approx: the heteroscedastic Gaussian surrogate
  l_i = -1/2 log(phi_i^2) - (D_i - mu_i)^2 / (2 phi_i^2)
  with mu_i = sum p_ij and phi_i^2 = sum p_ij (1 - p_ij).

The enumeration routines (combinatorial_*, exact_hessian) sum over every
subset of size D_i and are limited to small precincts.
"""

import logging
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Sequence, Tuple

import numpy as np
from scipy.special import expit, logsumexp

from core.errors import CapabilityError, DomainError, EvaluationError
from core.parallel import map_ordered
from services import poibin
from services.dataset import Dataset, PrecinctData, StackedView

logger = logging.getLogger(__name__)

PHI2_FLOOR = 1e-8
ENUMERATION_CAP = 15
FD_STEP = 1e-5


@dataclass(frozen=True)
class LogitModel:
    """Coefficient vector beta (intercept slot included)."""

    beta: np.ndarray

    kind = "logit"

    def __post_init__(self):
        beta = np.array(self.beta, dtype=float).reshape(-1)
        if not np.all(np.isfinite(beta)):
            raise DomainError("logit coefficients must be finite")
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)

    @classmethod
    def zeros(cls, p: int) -> "LogitModel":
        return cls(np.zeros(p))

    def logits(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.beta.size:
            raise DomainError(f"covariates have {X.shape[-1]} columns, model expects {self.beta.size}")
        return X @ self.beta

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return expit(self.logits(X))


@dataclass(frozen=True)
class GaussianMoments:
    """Mean and variance of a precinct count under the model."""

    mu: float
    phi2: float


def probs(model: LogitModel, precinct: PrecinctData) -> np.ndarray:
    """sigma(x_ij^T beta) for every voter in the precinct."""
    return model.predict_proba(precinct.X)


def _check_model(model: LogitModel, data: Dataset) -> None:
    if data.precincts and data.p != model.beta.size:
        raise DomainError(f"dataset has p={data.p}, model has {model.beta.size} coefficients")


# ---------------------------------------------------------------- exact path

def _precinct_loglik(model: LogitModel, pr: PrecinctData) -> float:
    return poibin.log_pmf(probs(model, pr), pr.D)


def exact_loglik(model: LogitModel, data: Dataset) -> float:
    """Sum over precincts of log Pr(D_i); -inf only when some Pr(D_i) is exactly 0."""
    _check_model(model, data)
    parts = map_ordered(lambda pr: _precinct_loglik(model, pr), data.precincts)
    return float(math.fsum(parts))


def _precinct_exact_grad(model: LogitModel, pr: PrecinctData) -> np.ndarray:
    p = probs(model, pr)
    conditional, log_pmf_d = poibin.conditional_success_probs(p, pr.D)
    if log_pmf_d == -np.inf:
        raise EvaluationError("Pr(D_i) is 0 under the model; gradient undefined", pr.id)
    return pr.X.T @ (conditional - p)


def exact_grad(model: LogitModel, data: Dataset) -> np.ndarray:
    """Sum over precincts of E[sum x Y | sum Y = D_i] - E[sum x Y]."""
    _check_model(model, data)
    if not data.precincts:
        return np.zeros(model.beta.size)
    parts = map_ordered(lambda pr: _precinct_exact_grad(model, pr), data.precincts)
    return np.sum(np.vstack(parts), axis=0)


def _enumerate_subsets(pr: PrecinctData, z: np.ndarray, cap: int) -> Tuple[np.ndarray, np.ndarray]:
    """Log-weights sum_{j in A} z_j and covariate sums over every A of size D_i."""
    if pr.size > cap:
        raise CapabilityError(
            f"precinct {pr.id} has {pr.size} voters; enumeration is limited to {cap} "
            f"(use diagnostics-scale inputs)"
        )
    subsets = list(combinations(range(pr.size), pr.D))
    index = np.array(subsets, dtype=int).reshape(len(subsets), pr.D)
    log_w = z[index].sum(axis=1)
    sums = pr.X[index].sum(axis=1)
    return log_w, sums


def _conditional_moments(pr: PrecinctData, z: np.ndarray, cap: int) -> Tuple[np.ndarray, np.ndarray, float]:
    log_w, sums = _enumerate_subsets(pr, z, cap)
    norm = float(logsumexp(log_w))
    w = np.exp(log_w - norm)
    mean = w @ sums
    centered = sums - mean
    cov = centered.T @ (centered * w[:, None])
    return mean, cov, norm


def combinatorial_loglik(model: LogitModel, data: Dataset, cap: int = ENUMERATION_CAP) -> float:
    """Exact log-likelihood as a log-sum-exp over all subsets of size D_i (oracle)."""
    _check_model(model, data)
    total = []
    for pr in data:
        z = model.logits(pr.X)
        log_w, _ = _enumerate_subsets(pr, z, cap)
        total.append(float(logsumexp(log_w)) - float(np.logaddexp(0.0, z).sum()))
    return float(math.fsum(total))


def combinatorial_grad(model: LogitModel, data: Dataset, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """Exact gradient by enumeration of the conditional distribution (oracle)."""
    _check_model(model, data)
    grad = np.zeros(model.beta.size)
    for pr in data:
        z = model.logits(pr.X)
        mean, _, _ = _conditional_moments(pr, z, cap)
        grad += mean - pr.X.T @ expit(z)
    return grad


def exact_hessian(model: LogitModel, data: Dataset, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """Sum over precincts of Cov(sum x Y | sum Y = D_i) - Cov(sum x Y), by enumeration."""
    _check_model(model, data)

    def contribution(pr: PrecinctData) -> np.ndarray:
        z = model.logits(pr.X)
        _, conditional_cov, _ = _conditional_moments(pr, z, cap)
        v = expit(z) * expit(-z)
        return conditional_cov - pr.X.T @ (pr.X * v[:, None])

    hessian = np.zeros((model.beta.size, model.beta.size))
    for part in map_ordered(contribution, data.precincts):
        hessian += part
    return 0.5 * (hessian + hessian.T)


# ---------------------------------------------------------------- Gaussian path

def moments(model: LogitModel, precinct: PrecinctData) -> GaussianMoments:
    z = model.logits(precinct.X)
    p, q = expit(z), expit(-z)
    return GaussianMoments(mu=float(p.sum()), phi2=float((p * q).sum()))


def gaussian_terms(p: np.ndarray, q: np.ndarray, stacked: StackedView, ids,
                   floor: float = PHI2_FLOOR) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-precinct (mu, phi2, residual) from stacked voter probabilities.

    q is 1 - p, passed separately so saturated probabilities keep their
    precision. Raises EvaluationError for the first precinct whose variance is
    below the floor (or not positive).
    """
    mu = stacked.segment_sum(p)
    phi2 = stacked.segment_sum(p * q)
    bad = np.flatnonzero((phi2 < floor) | (phi2 <= 0.0) | ~np.isfinite(phi2))
    if bad.size:
        i = int(bad[0])
        raise EvaluationError(
            f"count variance {phi2[i]:.3g} is below the floor {floor:g}; Gaussian approximation invalid",
            ids[i],
        )
    return mu, phi2, stacked.counts - mu


def gaussian_loglik_value(phi2: np.ndarray, resid: np.ndarray) -> float:
    return float(np.sum(-0.5 * np.log(phi2) - resid ** 2 / (2.0 * phi2)))


def gaussian_objective(prob_blocks: Sequence[np.ndarray], counts: Sequence[int],
                       floor: float = PHI2_FLOOR) -> float:
    """Gaussian surrogate for arbitrary per-precinct probability vectors (any model family)."""
    total = []
    for i, (p, d) in enumerate(zip(prob_blocks, counts)):
        p = poibin.as_prob_vector(p)
        phi2 = float(np.sum(p * (1.0 - p)))
        if not phi2 >= floor or phi2 <= 0.0:
            raise EvaluationError(f"count variance {phi2:.3g} is below the floor {floor:g}", str(i))
        total.append(-0.5 * math.log(phi2) - (d - float(p.sum())) ** 2 / (2.0 * phi2))
    return float(math.fsum(total))


def gaussian_dl_dp(p: np.ndarray, phi2: np.ndarray, resid: np.ndarray, stacked: StackedView) -> np.ndarray:
    """Derivative of the Gaussian objective with respect to every voter probability."""
    r = stacked.expand(resid)
    v2 = stacked.expand(phi2)
    return r / v2 + 0.5 * (r ** 2 / v2 ** 2 - 1.0 / v2) * (1.0 - 2.0 * p)


def _stacked_probs(model: LogitModel, data: Dataset) -> Tuple[np.ndarray, np.ndarray]:
    z = model.logits(data.stacked.X) if data.precincts else np.zeros(0)
    return expit(z), expit(-z)


def approx_loglik(model: LogitModel, data: Dataset, floor: float = PHI2_FLOOR) -> float:
    """Gaussian log-density of the counts, constants dropped."""
    _check_model(model, data)
    p, q = _stacked_probs(model, data)
    _, phi2, resid = gaussian_terms(p, q, data.stacked, data.ids, floor)
    return gaussian_loglik_value(phi2, resid)


def approx_grad(model: LogitModel, data: Dataset, floor: float = PHI2_FLOOR) -> np.ndarray:
    """Gradient of approx_loglik:
    (D-mu)/phi^2 sum p(1-p)x - 1/2 ((D-mu)^2/phi^4 - 1/phi^2) sum (2p-1)p(1-p)x.
    """
    _check_model(model, data)
    p, q = _stacked_probs(model, data)
    stacked = data.stacked
    _, phi2, resid = gaussian_terms(p, q, stacked, data.ids, floor)
    dl_dp = gaussian_dl_dp(p, phi2, resid, stacked)
    return stacked.X.T @ (dl_dp * p * q)


# ---------------------------------------------------------------- numerical checks

def finite_difference_grad(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Central differences of a scalar function."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for k in range(x.size):
        step = np.zeros_like(x)
        step.flat[k] = h
        grad.flat[k] = (f(x + step) - f(x - step)) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Largest |analytic - numeric| / max(1, |analytic|) over components."""
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    return float(np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic)), initial=0.0))
