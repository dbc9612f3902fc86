"""
Poisson binomial probability kernel.

The distribution of a sum of independent, non-identically distributed
Bernoulli variables. Everything here is a pure function of an immutable
probability vector, so it is safe to call from many threads.

The production kernel is a direct convolution over the probabilities
(O(n^2)) carried in log space, so tail probabilities far below the mode stay
finite. Entries that are exactly 0 or 1 are deterministic and are removed
before the convolution; they only shift the support.
"""

from typing import Sequence, Tuple, Union

import numpy as np
from scipy.special import logsumexp

from core.errors import DomainError

ProbVector = Union[Sequence[float], np.ndarray]


def as_prob_vector(p: ProbVector) -> np.ndarray:
    """Validate p and return it as a 1-d float array."""
    probs = np.asarray(p, dtype=float)
    if probs.ndim != 1:
        raise DomainError(f"probability vector must be 1-d, got shape {probs.shape}")
    if probs.size and (not np.all(np.isfinite(probs)) or probs.min() < 0.0 or probs.max() > 1.0):
        bad = int(np.flatnonzero(~((probs >= 0.0) & (probs <= 1.0)))[0])
        raise DomainError(f"probability at index {bad} is outside [0, 1]: {probs[bad]!r}")
    return probs


def _check_count(k: int, upper: int) -> int:
    if int(k) != k or not 0 <= k <= upper:
        raise DomainError(f"count {k} outside [0, {upper}]")
    return int(k)


def _log_parts(probs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(log p, log(1 - p)); -inf at the endpoints."""
    with np.errstate(divide="ignore"):
        return np.log(probs), np.log1p(-probs)


def log_pmf_vector(p: ProbVector) -> np.ndarray:
    """Log-probabilities of k = 0..len(p) successes (-inf where the mass is exactly 0)."""
    probs = as_prob_vector(p)
    n = probs.size
    ones = int(np.count_nonzero(probs == 1.0))
    free = probs[(probs > 0.0) & (probs < 1.0)]
    log_q, log_r = _log_parts(free)

    row = np.full(free.size + 1, -np.inf)
    row[0] = 0.0
    for i in range(free.size):
        head = row[: i + 1].copy()
        row[: i + 1] = head + log_r[i]
        row[1 : i + 2] = np.logaddexp(row[1 : i + 2], head + log_q[i])

    out = np.full(n + 1, -np.inf)
    out[ones : ones + free.size + 1] = row
    return out


def log_pmf(p: ProbVector, k: int) -> float:
    """log Pr(sum of the Bernoullis == k)."""
    probs = as_prob_vector(p)
    k = _check_count(k, probs.size)
    return float(log_pmf_vector(probs)[k])


def pmf_vector(p: ProbVector) -> np.ndarray:
    """Probabilities of k = 0..len(p) successes."""
    return np.exp(log_pmf_vector(p))


def _log_prefix_table(probs: np.ndarray) -> np.ndarray:
    """Row j holds the log-pmf of the first j probabilities (-inf padded to n+1)."""
    n = probs.size
    log_q, log_r = _log_parts(probs)
    table = np.full((n + 1, n + 1), -np.inf)
    table[0, 0] = 0.0
    for j in range(n):
        prev = table[j, : j + 1]
        table[j + 1, : j + 1] = prev + log_r[j]
        table[j + 1, 1 : j + 2] = np.logaddexp(table[j + 1, 1 : j + 2], prev + log_q[j])
    return table


def _two_sided_tables(probs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    prefix = _log_prefix_table(probs)
    # row m of the suffix table is the log-pmf of probs[m:]
    suffix = _log_prefix_table(probs[::-1])[::-1]
    return prefix, suffix


def _log_loo_column(prefix: np.ndarray, suffix: np.ndarray, k: int) -> np.ndarray:
    n = prefix.shape[0] - 1
    if k < 0:
        return np.full(n, -np.inf)
    with np.errstate(divide="ignore"):
        return logsumexp(prefix[:n, : k + 1] + suffix[1:, k::-1], axis=1)


def leave_one_out_column(p: ProbVector, k: int) -> np.ndarray:
    """Entry j is Pr(sum over l != j of Y_l == k), for every j at once.

    Built from one forward and one backward convolution: the distribution
    without voter j is the convolution of the prefix before j with the suffix
    after j. All terms are nonnegative, so there is no cancellation and no
    conditioning problem when some p_j is close to 1.
    """
    probs = as_prob_vector(p)
    if probs.size == 0:
        raise DomainError("leave-one-out needs at least one probability")
    k = _check_count(k, probs.size - 1)
    prefix, suffix = _two_sided_tables(probs)
    return np.exp(_log_loo_column(prefix, suffix, k))


def leave_one_out_pmf(p: ProbVector, j: int, k: int) -> float:
    """Pr(sum over l != j of Y_l == k)."""
    probs = as_prob_vector(p)
    if int(j) != j or not 0 <= j < probs.size:
        raise DomainError(f"index {j} outside [0, {probs.size})")
    return float(leave_one_out_column(probs, k)[int(j)])


def conditional_success_probs(p: ProbVector, d: int) -> Tuple[np.ndarray, float]:
    """E[Y_j | sum Y == d] for every j, together with log Pr(sum Y == d).

    Uses p_j * LOO_j(d - 1) / Pr(d), formed in log space. When Pr(d) is
    exactly 0 the conditional expectations are undefined and are returned as
    NaN with a log-probability of -inf.
    """
    probs = as_prob_vector(p)
    d = _check_count(d, probs.size)
    prefix, suffix = _two_sided_tables(probs)
    log_pmf_d = float(prefix[probs.size, d])
    if log_pmf_d == -np.inf:
        return np.full(probs.size, np.nan), log_pmf_d
    log_q, _ = _log_parts(probs)
    conditional = np.exp(log_q + _log_loo_column(prefix, suffix, d - 1) - log_pmf_d)
    return np.minimum(conditional, 1.0), log_pmf_d


def pmf_dft(p: ProbVector) -> np.ndarray:
    """Pmf through the discrete Fourier transform of the characteristic function.

    Cross-check only; the convolution kernel above is the production path.
    """
    probs = as_prob_vector(p)
    size = probs.size + 1
    omega = np.exp(2j * np.pi * np.arange(size) / size)
    chi = np.prod(1.0 - probs[:, None] + probs[:, None] * omega[None, :], axis=0)
    values = np.fft.fft(chi).real / size
    return np.clip(values, 0.0, 1.0)
