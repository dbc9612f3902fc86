"""
Synthetic precinct data with known coefficients.

Covariates are standard normal, optionally shifted by a per-precinct mean so
that precincts differ in composition. Outcomes are drawn from the logistic
model and the counts are their per-precinct sums. Every draw comes from one
generator seeded by the config, so a config maps to exactly one dataset.
"""

import logging
import os
from dataclasses import asdict, dataclass
from typing import Any, Dict, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from core.errors import ConfigError
from services.dataset import INTERCEPT, Dataset, LabeledDataset, PrecinctData, write_dataset
from utils.files import write_json

logger = logging.getLogger(__name__)

SCHEMES = ("iid-normal", "precinct-shifted-normal")


@dataclass
class SimConfig:
    n_precincts: int = 400
    voters_per_precinct: Union[int, Tuple[int, int]] = 100
    p: int = 5
    beta_true: Union[str, Sequence[float]] = "random"
    covariate_scheme: str = "precinct-shifted-normal"
    precinct_shift_scale: Union[float, Sequence[float]] = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_precincts < 1 or self.p < 1:
            raise ConfigError("n_precincts and p must be >= 1")
        if isinstance(self.voters_per_precinct, (list, tuple)):
            low, high = (int(v) for v in self.voters_per_precinct)
            if not 1 <= low <= high:
                raise ConfigError(f"voters_per_precinct range must satisfy 1 <= lo <= hi, got {low}..{high}")
            self.voters_per_precinct = (low, high)
        elif int(self.voters_per_precinct) < 1:
            raise ConfigError("voters_per_precinct must be >= 1")
        if self.covariate_scheme not in SCHEMES:
            raise ConfigError(f"covariate_scheme must be one of {', '.join(SCHEMES)}")
        if isinstance(self.beta_true, str):
            if self.beta_true != "random":
                raise ConfigError("beta_true must be a vector or 'random'")
        elif len(self.beta_true) != self.p + 1:
            raise ConfigError(f"beta_true needs p + 1 = {self.p + 1} entries (intercept first)")
        shift = np.atleast_1d(np.asarray(self.precinct_shift_scale, dtype=float))
        if shift.size not in (1, self.p) or np.any(shift < 0):
            raise ConfigError(f"precinct_shift_scale must be a non-negative scalar or {self.p} values")

    def shift_scales(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.precinct_shift_scale, dtype=float), (self.p,)).copy()

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        if not isinstance(self.beta_true, str):
            out["beta_true"] = [float(v) for v in self.beta_true]
        if isinstance(self.voters_per_precinct, tuple):
            out["voters_per_precinct"] = list(self.voters_per_precinct)
        if not np.isscalar(self.precinct_shift_scale):
            out["precinct_shift_scale"] = [float(v) for v in self.precinct_shift_scale]
        return out


@dataclass(frozen=True)
class Simulation:
    labeled: LabeledDataset
    beta_true: np.ndarray
    config: SimConfig

    @property
    def data(self) -> Dataset:
        return self.labeled.data


def simulate(cfg: SimConfig) -> Simulation:
    rng = np.random.default_rng(cfg.seed)
    if isinstance(cfg.beta_true, str):
        beta = rng.uniform(-1.0, 1.0, size=cfg.p + 1)
    else:
        beta = np.asarray(cfg.beta_true, dtype=float)

    if isinstance(cfg.voters_per_precinct, tuple):
        low, high = cfg.voters_per_precinct
        sizes = rng.integers(low, high + 1, size=cfg.n_precincts)
    else:
        sizes = np.full(cfg.n_precincts, int(cfg.voters_per_precinct))

    shifts = cfg.shift_scales()
    shifted = cfg.covariate_scheme == "precinct-shifted-normal"
    width = len(str(cfg.n_precincts))
    precincts, labels = [], []
    voter_number = 0
    for i, size in enumerate(sizes):
        mean = rng.standard_normal(cfg.p) * shifts if shifted else np.zeros(cfg.p)
        Z = mean + rng.standard_normal((int(size), cfg.p))
        X = np.column_stack([np.ones(int(size)), Z])
        y = (rng.random(int(size)) < expit(X @ beta)).astype(int)
        voter_ids = tuple(f"v{voter_number + j + 1:06d}" for j in range(int(size)))
        voter_number += int(size)
        precincts.append(PrecinctData(f"p{i + 1:0{max(width, 4)}d}", X, int(y.sum()), voter_ids))
        labels.append(y)

    names = (INTERCEPT,) + tuple(f"x{k + 1}" for k in range(cfg.p))
    data = Dataset(tuple(precincts), names)
    logger.info(f"Simulated {cfg.n_precincts} precincts / {data.n_voters} voters (seed {cfg.seed})")
    return Simulation(LabeledDataset(data, tuple(labels)), beta, cfg)


def write_simulation(sim: Simulation, out_dir: str) -> Dict[str, str]:
    """voters.csv, counts.csv, labels.csv and truth.json (beta_true and the config)."""
    paths = write_dataset(sim.labeled, out_dir)
    paths["truth"] = os.path.join(out_dir, "truth.json")
    write_json(paths["truth"], {
        "beta_true": [float(v) for v in sim.beta_true],
        "feature_names": list(sim.data.feature_names),
        "config": sim.config.to_dict(),
    })
    return paths
