"""
Executable checks on the shape of the exact likelihood.

- Perfect separation: a direction b and, in every precinct, a subset A_i of
  size D_i with b^T x > 0 on A_i and b^T x < 0 on its complement. Such a
  direction makes the likelihood increase forever along b, so no finite
  maximizer exists. Finding one is a margin-maximizing linear program per
  combination of subsets. Failing to find one does not prove that a
  maximizer exists.
- Curvature: eigenvalues of the exact Hessian (small precincts only), random
  search for an instance with mixed-sign curvature, and the trend of the
  largest eigenvalue of the averaged Hessian at the true parameter as the
  number of precincts grows.
"""

import logging
import math
from dataclasses import dataclass, replace
from itertools import combinations, product
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import linprog
from scipy.stats import norm

from core.errors import CapabilityError, DomainError
from services import poibin
from services.dataset import Dataset
from services.likelihood import ENUMERATION_CAP, LogitModel, exact_hessian
from services.simulator import SimConfig, simulate

logger = logging.getLogger(__name__)

SEPARATION_CAP = 1_000_000
MARGIN_TOL = 1e-9
NSD_TOL = 1e-10
MIXED_TOL = 1e-6
CONCAVITY_SIZES = (10, 50, 200, 500)


@dataclass(frozen=True)
class SeparationCertificate:
    direction: np.ndarray
    subsets: Tuple[Tuple[int, ...], ...]
    margin: float
    mode: str = "exhaustive"

    def to_dict(self, data: Optional[Dataset] = None) -> Dict[str, Any]:
        out = {
            "direction": [float(v) for v in self.direction],
            "margin": float(self.margin),
            "mode": self.mode,
            "subsets": [list(s) for s in self.subsets],
        }
        if data is not None:
            out["subsets"] = {pr.id: [pr.voter_ids[j] for j in s] for pr, s in zip(data, self.subsets)}
        return out


def verify_certificate(cert: SeparationCertificate, data: Dataset, tol: float = MARGIN_TOL) -> bool:
    """Direct substitution: every strict inequality holds with margin >= tol."""
    if len(cert.subsets) != len(data):
        return False
    direction = np.asarray(cert.direction, dtype=float)
    if direction.shape != (data.p,):
        return False
    for pr, subset in zip(data, cert.subsets):
        if len(subset) != pr.D or len(set(subset)) != len(subset):
            return False
        scores = pr.X @ direction
        inside = np.zeros(pr.size, dtype=bool)
        inside[list(subset)] = True
        if np.any(scores[inside] < tol) or np.any(scores[~inside] > -tol):
            return False
    return True


def count_subset_combinations(data: Dataset, stop_above: float = math.inf) -> float:
    """prod_i C(|S_i|, D_i), stopping early once it passes stop_above."""
    total = 1
    for pr in data:
        total *= math.comb(pr.size, pr.D)
        if total > stop_above:
            return float(total)
    return float(total)


def _max_margin(data: Dataset, subsets: Sequence[Tuple[int, ...]]) -> Optional[Tuple[np.ndarray, float]]:
    """Maximize s subject to sign_j * b^T x_j >= s, |b|_inf <= 1."""
    stacked = data.stacked
    signs = -np.ones(stacked.X.shape[0])
    for offset, subset in zip(stacked.offsets, subsets):
        signs[offset + np.asarray(subset, dtype=int)] = 1.0
    A_ub = np.column_stack([-signs[:, None] * stacked.X, np.ones(stacked.X.shape[0])])
    b_ub = np.zeros(stacked.X.shape[0])
    c = np.zeros(data.p + 1)
    c[-1] = -1.0
    bounds = [(-1.0, 1.0)] * data.p + [(None, 1.0)]
    result = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if result.status != 0 or -result.fun <= MARGIN_TOL:
        return None
    direction = result.x[: data.p]
    margin = float(np.min(signs * (stacked.X @ direction)))
    if margin <= MARGIN_TOL:
        return None
    return direction, margin


def _exhaustive_candidates(data: Dataset) -> Iterator[Tuple[Tuple[int, ...], ...]]:
    return product(*[combinations(range(pr.size), pr.D) for pr in data])


def _heuristic_candidates(data: Dataset, n_random: int, seed: int) -> Iterator[Tuple[Tuple[int, ...], ...]]:
    """Per-precinct top-D_i voters along the signed axes and seeded random unit directions."""
    p = data.p
    axes = np.vstack([np.eye(p), -np.eye(p)])
    rng = np.random.default_rng(seed)
    random_dirs = rng.standard_normal((n_random, p))
    random_dirs /= np.linalg.norm(random_dirs, axis=1, keepdims=True)
    seen = set()
    for direction in np.vstack([axes, random_dirs]):
        candidate = tuple(
            tuple(sorted(int(j) for j in np.argsort(-(pr.X @ direction), kind="stable")[: pr.D]))
            for pr in data
        )
        if candidate not in seen:
            seen.add(candidate)
            yield candidate


def detect_separation(data: Dataset, cap: float = SEPARATION_CAP, heuristic: bool = False, seed: int = 0,
                      n_random: int = 100) -> Optional[SeparationCertificate]:
    """First certificate in candidate order, or None when none is found."""
    if not data.precincts:
        raise DomainError("separation check needs at least one precinct")
    total = count_subset_combinations(data, stop_above=cap)
    if total <= cap:
        mode, candidates = "exhaustive", _exhaustive_candidates(data)
        logger.info(f"Separation search: exhaustive over {int(total)} subset combinations")
    elif heuristic:
        mode, candidates = "heuristic", _heuristic_candidates(data, n_random, seed)
        logger.info(f"Separation search: heuristic ({2 * data.p} axes + {n_random} random directions)")
    else:
        raise CapabilityError(
            f"more than {cap:g} subset combinations; rerun with the heuristic mode or a smaller dataset"
        )

    tried = 0
    for subsets in candidates:
        tried += 1
        found = _max_margin(data, subsets)
        if found is None:
            continue
        direction, margin = found
        cert = SeparationCertificate(direction, tuple(subsets), margin, mode)
        if verify_certificate(cert, data):
            logger.info(f"Separation certificate found after {tried} candidate(s), margin {margin:.3g}")
            return cert
    logger.info(f"No separation certificate among {tried} candidate(s) ({mode})")
    return None


@dataclass(frozen=True)
class HessianProbe:
    eigenvalues: np.ndarray
    max_eig: float
    is_nsd: bool

    def to_dict(self) -> Dict[str, Any]:
        return {"eigenvalues": [float(v) for v in self.eigenvalues], "max_eig": self.max_eig, "is_nsd": self.is_nsd}


def hessian_probe(data: Dataset, beta: Sequence[float], cap: int = ENUMERATION_CAP) -> HessianProbe:
    hessian = exact_hessian(LogitModel(beta), data, cap)
    eigenvalues = np.linalg.eigvalsh(hessian)
    max_eig = float(eigenvalues[-1])
    return HessianProbe(eigenvalues, max_eig, max_eig <= NSD_TOL)


@dataclass(frozen=True)
class NonconcaveInstance:
    data: Dataset
    beta: np.ndarray
    eigenvalues: np.ndarray
    draws: int


def _random_instance(rng: np.random.Generator, p: int) -> Tuple[Dataset, np.ndarray]:
    n_precincts = int(rng.integers(1, 4))
    blocks, counts = [], []
    for _ in range(n_precincts):
        size = int(rng.integers(1, 5))
        blocks.append(rng.normal(0.0, 2.0, size=(size, p)))
        counts.append(int(rng.integers(0, size + 1)))
    return Dataset.from_arrays(blocks, counts), rng.normal(0.0, 0.5, size=p)


def find_nonconcave_instance(budget: int = 10_000, seed: int = 0, p: int = 2) -> Optional[NonconcaveInstance]:
    """Random search over small (data, beta) pairs for a Hessian with eigenvalues of both signs."""
    rng = np.random.default_rng(seed)
    for draw in range(1, budget + 1):
        data, beta = _random_instance(rng, p)
        eigenvalues = np.linalg.eigvalsh(exact_hessian(LogitModel(beta), data))
        if eigenvalues[-1] > MIXED_TOL and eigenvalues[0] < -MIXED_TOL:
            logger.info(f"Mixed-curvature instance found after {draw} draw(s): eigenvalues {eigenvalues}")
            return NonconcaveInstance(data, beta, eigenvalues, draw)
    logger.info(f"No mixed-curvature instance in {budget} draws")
    return None


@dataclass(frozen=True)
class ConcavityRow:
    n: int
    max_eig: float


def asymptotic_concavity_experiment(base: SimConfig, sizes: Sequence[int] = CONCAVITY_SIZES,
                                    cap: int = ENUMERATION_CAP) -> List[ConcavityRow]:
    """Largest eigenvalue of the Hessian divided by n at the true beta, for each n."""
    if base.covariate_scheme != "precinct-shifted-normal":
        raise DomainError("the concavity experiment needs the precinct-shifted covariate scheme")
    largest = base.voters_per_precinct[1] if isinstance(base.voters_per_precinct, tuple) else base.voters_per_precinct
    if largest > cap:
        raise CapabilityError(f"precincts of up to {largest} voters exceed the enumeration cap {cap}")
    rows = []
    for n in sizes:
        sim = simulate(replace(base, n_precincts=int(n)))
        hessian = exact_hessian(LogitModel(sim.beta_true), sim.data, cap) / n
        max_eig = float(np.linalg.eigvalsh(hessian)[-1])
        logger.info(f"Concavity experiment: n={n} max eigenvalue {max_eig:.6g}")
        rows.append(ConcavityRow(int(n), max_eig))
    return rows


def write_concavity_csv(rows: Sequence[ConcavityRow], path: str) -> None:
    frame = pd.DataFrame({"n": [r.n for r in rows], "max_eig": [r.max_eig for r in rows]})
    frame.to_csv(path, index=False, lineterminator="\n", float_format="%.17g")


def gaussian_cdf_gap(p: Sequence[float]) -> float:
    """max_k |Phi((k - mu)/phi) - F(k)| between the Poisson binomial cdf and its normal approximation."""
    probs = poibin.as_prob_vector(p)
    mu = float(probs.sum())
    phi = math.sqrt(float(np.sum(probs * (1.0 - probs))))
    if phi == 0.0:
        raise DomainError("normal approximation undefined for a degenerate count")
    cdf = np.cumsum(poibin.pmf_vector(probs))
    k = np.arange(probs.size + 1)
    return float(np.max(np.abs(norm.cdf(k, loc=mu, scale=phi) - cdf)))
