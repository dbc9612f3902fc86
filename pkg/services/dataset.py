"""
Precinct-aggregated datasets: domain types, CSV ingestion and serialization.

File formats (UTF-8, header row required):

- voters.csv: precinct_id,voter_id,<feature...>   one row per voter
- counts.csv: precinct_id,size,count              one row per precinct
- labels.csv: precinct_id,voter_id,label          evaluation only, label in {0,1}

Each voter row belongs to exactly one precinct, so the precincts are disjoint
by construction. An intercept column of ones is prepended as feature 0.
"""

import logging
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core.errors import DomainError, ValidationError

logger = logging.getLogger(__name__)

INTERCEPT = "intercept"
VOTER_KEYS = ("precinct_id", "voter_id")
COUNT_COLUMNS = ("precinct_id", "size", "count")
LABEL_COLUMNS = ("precinct_id", "voter_id", "label")


@dataclass(frozen=True)
class PrecinctData:
    """One aggregation unit: voter covariates (rows) and the observed positive count."""

    id: str
    X: np.ndarray
    D: int
    voter_ids: Tuple[str, ...] = ()

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        if X.ndim != 2 or X.shape[0] < 1:
            raise DomainError(f"precinct {self.id}: covariates must be a matrix with at least one row")
        if not np.all(np.isfinite(X)):
            raise DomainError(f"precinct {self.id}: covariates must be finite")
        if int(self.D) != self.D or not 0 <= self.D <= X.shape[0]:
            raise DomainError(f"precinct {self.id}: count {self.D} outside [0, {X.shape[0]}]")
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "D", int(self.D))
        voter_ids = tuple(str(v) for v in self.voter_ids)
        if not voter_ids:
            voter_ids = tuple(f"{self.id}-{j}" for j in range(X.shape[0]))
        if len(voter_ids) != X.shape[0]:
            raise DomainError(f"precinct {self.id}: {len(voter_ids)} voter ids for {X.shape[0]} rows")
        object.__setattr__(self, "voter_ids", voter_ids)

    @property
    def size(self) -> int:
        return int(self.X.shape[0])


@dataclass(frozen=True)
class Standardization:
    """Per-feature centering/scaling applied at ingestion (binary columns are left as-is)."""

    feature_names: Tuple[str, ...]
    means: Tuple[float, ...]
    scales: Tuple[float, ...]

    @classmethod
    def identity(cls, feature_names: Sequence[str]) -> "Standardization":
        names = tuple(feature_names)
        return cls(names, tuple(0.0 for _ in names), tuple(1.0 for _ in names))

    @classmethod
    def fit(cls, feature_names: Sequence[str], raw: np.ndarray) -> "Standardization":
        means, scales = [], []
        for k in range(raw.shape[1]):
            column = raw[:, k]
            if np.all((column == 0.0) | (column == 1.0)):
                means.append(0.0)
                scales.append(1.0)
                continue
            scale = float(column.std())
            means.append(float(column.mean()))
            scales.append(scale if scale > 0.0 else 1.0)
        return cls(tuple(feature_names), tuple(means), tuple(scales))

    def apply(self, raw: np.ndarray) -> np.ndarray:
        return (raw - np.asarray(self.means)) / np.asarray(self.scales)

    def beta_to_standardized(self, beta_raw: Sequence[float]) -> np.ndarray:
        """Express a raw-scale coefficient vector (intercept first) in standardized coordinates."""
        beta = np.asarray(beta_raw, dtype=float)
        means, scales = np.asarray(self.means), np.asarray(self.scales)
        out = np.empty_like(beta)
        out[1:] = beta[1:] * scales
        out[0] = beta[0] + float(np.dot(beta[1:], means))
        return out

    def to_dict(self) -> Dict[str, Any]:
        return {"feature_names": list(self.feature_names), "means": list(self.means), "scales": list(self.scales)}

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "Standardization":
        return cls(tuple(payload["feature_names"]), tuple(float(v) for v in payload["means"]),
                   tuple(float(v) for v in payload["scales"]))


@dataclass(frozen=True)
class StackedView:
    """All voters of a dataset in one matrix, with precinct segment offsets."""

    X: np.ndarray
    counts: np.ndarray
    sizes: np.ndarray
    offsets: np.ndarray

    def segment_sum(self, values: np.ndarray) -> np.ndarray:
        """Per-precinct sums of per-voter values (rows of values follow X)."""
        if self.offsets.size == 0:
            return np.zeros((0,) + values.shape[1:])
        return np.add.reduceat(values, self.offsets, axis=0)

    def expand(self, per_precinct: np.ndarray) -> np.ndarray:
        """Repeat a per-precinct value once per voter."""
        return np.repeat(per_precinct, self.sizes, axis=0)


@dataclass(frozen=True)
class Dataset:
    """Precincts sharing a covariate dimension p."""

    precincts: Tuple[PrecinctData, ...]
    feature_names: Tuple[str, ...] = ()
    standardization: Optional[Standardization] = None

    def __post_init__(self):
        precincts = tuple(self.precincts)
        object.__setattr__(self, "precincts", precincts)
        dims = {pr.X.shape[1] for pr in precincts}
        if len(dims) > 1:
            raise DomainError(f"precincts disagree on covariate dimension: {sorted(dims)}")
        ids = [pr.id for pr in precincts]
        if len(set(ids)) != len(ids):
            raise DomainError("precinct ids must be unique")
        names = tuple(self.feature_names)
        if not names and dims:
            names = tuple(f"x{k}" for k in range(dims.pop()))
        if precincts and len(names) != precincts[0].X.shape[1]:
            raise DomainError(f"{len(names)} feature names for {precincts[0].X.shape[1]} columns")
        object.__setattr__(self, "feature_names", names)

    @classmethod
    def from_arrays(cls, blocks: Sequence[Any], counts: Sequence[int], ids: Optional[Sequence[str]] = None,
                    feature_names: Optional[Sequence[str]] = None, add_intercept: bool = False,
                    voter_ids: Optional[Sequence[Sequence[str]]] = None,
                    standardization: Optional[Standardization] = None) -> "Dataset":
        if len(blocks) != len(counts):
            raise DomainError(f"{len(blocks)} covariate blocks for {len(counts)} counts")
        precincts = []
        for i, (block, d) in enumerate(zip(blocks, counts)):
            X = np.atleast_2d(np.asarray(block, dtype=float))
            if add_intercept:
                X = np.column_stack([np.ones(X.shape[0]), X])
            pid = str(ids[i]) if ids is not None else f"p{i}"
            vids = tuple(voter_ids[i]) if voter_ids is not None else ()
            precincts.append(PrecinctData(pid, X, int(d), vids))
        names = tuple(feature_names) if feature_names is not None else ()
        if add_intercept and names and names[0] != INTERCEPT:
            names = (INTERCEPT,) + names
        return cls(tuple(precincts), names, standardization)

    @property
    def p(self) -> int:
        return len(self.feature_names)

    @property
    def ids(self) -> List[str]:
        return [pr.id for pr in self.precincts]

    @property
    def n_voters(self) -> int:
        return int(sum(pr.size for pr in self.precincts))

    def __len__(self) -> int:
        return len(self.precincts)

    def __iter__(self):
        return iter(self.precincts)

    @cached_property
    def stacked(self) -> StackedView:
        sizes = np.array([pr.size for pr in self.precincts], dtype=int)
        offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(int) if sizes.size else sizes
        X = np.vstack([pr.X for pr in self.precincts]) if self.precincts else np.zeros((0, self.p))
        counts = np.array([pr.D for pr in self.precincts], dtype=float)
        for arr in (sizes, offsets, X, counts):
            arr.setflags(write=False)
        return StackedView(X, counts, sizes, offsets)

    def subset(self, ids: Iterable[str]) -> "Dataset":
        wanted = set(ids)
        return Dataset(tuple(pr for pr in self.precincts if pr.id in wanted), self.feature_names,
                       self.standardization)


@dataclass(frozen=True)
class LabeledDataset:
    """Dataset plus per-voter binary outcomes (simulation truth / evaluation only)."""

    data: Dataset
    labels: Tuple[np.ndarray, ...] = field(default=())

    def __post_init__(self):
        labels = tuple(np.asarray(y, dtype=int) for y in self.labels)
        if len(labels) != len(self.data):
            raise ValidationError(f"{len(labels)} label blocks for {len(self.data)} precincts")
        for pr, y in zip(self.data, labels):
            if y.shape != (pr.size,):
                raise ValidationError(f"precinct {pr.id}: {y.size} labels for {pr.size} voters")
            if not np.all((y == 0) | (y == 1)):
                raise ValidationError(f"precinct {pr.id}: labels must be 0 or 1")
            if int(y.sum()) != pr.D:
                raise ValidationError(f"precinct {pr.id}: label sum {int(y.sum())} differs from count {pr.D}")
            y.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    def all_labels(self) -> np.ndarray:
        if not self.labels:
            return np.zeros(0, dtype=int)
        return np.concatenate(self.labels)

    def subset(self, ids: Iterable[str]) -> "LabeledDataset":
        wanted = set(ids)
        keep = [i for i, pr in enumerate(self.data) if pr.id in wanted]
        return LabeledDataset(self.data.subset(wanted), tuple(self.labels[i] for i in keep))


def _read_csv(path: str, key_columns: Sequence[str]) -> pd.DataFrame:
    if not os.path.isfile(path):
        raise ValidationError("file not found", source=path)
    try:
        header = [str(c).strip() for c in pd.read_csv(path, nrows=0, encoding="utf-8").columns]
        frame = pd.read_csv(path, dtype={c: str for c in key_columns if c in header}, encoding="utf-8",
                            float_precision="round_trip", skipinitialspace=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise ValidationError(f"could not parse CSV: {e}", source=path) from e
    frame.columns = [str(c).strip() for c in frame.columns]
    return frame


def _read_voters(voters_file: str) -> Tuple[pd.DataFrame, List[str]]:
    frame = _read_csv(voters_file, VOTER_KEYS)
    if tuple(frame.columns[:2]) != VOTER_KEYS:
        raise ValidationError(f"header must start with {','.join(VOTER_KEYS)}", source=voters_file)
    features = list(frame.columns[2:])
    for column in features:
        numeric = pd.to_numeric(frame[column], errors="coerce")
        missing = numeric.isna().to_numpy()
        if missing.any():
            row = int(np.flatnonzero(missing)[0]) + 2
            raise ValidationError(f"missing or non-numeric value in column '{column}'", source=voters_file, row=row)
        frame[column] = numeric.astype(float)
    for column in VOTER_KEYS:
        missing = frame[column].isna().to_numpy()
        if missing.any():
            row = int(np.flatnonzero(missing)[0]) + 2
            raise ValidationError(f"missing {column}", source=voters_file, row=row)
    return frame, features


def _require_columns(wanted: Sequence[str], available: Sequence[str], source: str) -> List[str]:
    missing = [name for name in wanted if name not in available]
    if missing:
        raise ValidationError(f"voters file is missing feature column '{missing[0]}'", source=source)
    return list(wanted)


def _replay(standardization: Standardization, names: Sequence[str]) -> Standardization:
    """The stored standardization restricted to (and ordered like) names."""
    unknown = [name for name in names if name not in standardization.feature_names]
    if unknown:
        raise ValidationError(f"model standardization has no entry for {unknown}")
    order = [standardization.feature_names.index(name) for name in names]
    return Standardization(tuple(names), tuple(standardization.means[k] for k in order),
                           tuple(standardization.scales[k] for k in order))


def load_dataset(voters_file: str, counts_file: str, standardize: bool = True,
                 standardization: Optional[Standardization] = None, intercept: bool = True) -> Dataset:
    """Read voters.csv and counts.csv into a validated Dataset.

    A given standardization (from a model file) is replayed instead of fitting
    a new one; its feature names then define the columns that are used.
    """
    voters, features = _read_voters(voters_file)
    counts = _read_csv(counts_file, ("precinct_id",))
    if tuple(counts.columns) != COUNT_COLUMNS:
        raise ValidationError(f"header must be {','.join(COUNT_COLUMNS)}", source=counts_file)
    for column in ("size", "count"):
        numeric = pd.to_numeric(counts[column], errors="coerce")
        bad = (numeric.isna() | (numeric != numeric.round())).to_numpy()
        if bad.any():
            row = int(np.flatnonzero(bad)[0]) + 2
            raise ValidationError(f"'{column}' must be an integer", source=counts_file, row=row)
        counts[column] = numeric.astype(int)
    if counts["precinct_id"].duplicated().any():
        dup = counts.loc[counts["precinct_id"].duplicated(), "precinct_id"].iloc[0]
        raise ValidationError(f"duplicate precinct id '{dup}'", source=counts_file)

    groups = voters.groupby("precinct_id", sort=False).indices
    count_ids = list(counts["precinct_id"])
    known = set(count_ids)
    missing_voters = [pid for pid in count_ids if pid not in groups]
    missing_counts = [pid for pid in groups if pid not in known]
    if missing_voters:
        raise ValidationError(f"precinct(s) with a count but no voters: {missing_voters[:5]}", source=counts_file)
    if missing_counts:
        raise ValidationError(f"precinct(s) with voters but no count: {missing_counts[:5]}", source=voters_file)

    if standardization is not None:
        features = _require_columns(standardization.feature_names, features, voters_file)
        raw = voters[features].to_numpy(dtype=float) if features else np.zeros((len(voters), 0))
        standardization = _replay(standardization, features)
    else:
        raw = voters[features].to_numpy(dtype=float) if features else np.zeros((len(voters), 0))
        standardization = Standardization.fit(features, raw) if standardize else Standardization.identity(features)
    design = standardization.apply(raw)
    if intercept:
        design = np.column_stack([np.ones(len(voters)), design])
    voter_ids = voters["voter_id"].to_numpy()

    precincts = []
    rows_iter = zip(counts["precinct_id"], counts["size"], counts["count"])
    for row_number, (pid, size, count) in enumerate(rows_iter, start=2):
        pid, size, count = str(pid), int(size), int(count)
        rows = groups[pid]
        if size != len(rows):
            raise ValidationError(f"precinct '{pid}' declares size {size} but has {len(rows)} voter rows",
                                  source=counts_file, row=row_number)
        if not 0 <= count <= size:
            raise ValidationError(f"precinct '{pid}' count {count} exceeds its size {size}",
                                  source=counts_file, row=row_number)
        precincts.append(PrecinctData(pid, design[rows], count, tuple(voter_ids[rows])))

    if len(set(voter_ids)) != len(voter_ids):
        logger.warning(f"{voters_file}: voter ids are not unique across precincts")

    names = ((INTERCEPT,) if intercept else ()) + tuple(features)
    dataset = Dataset(tuple(precincts), names, standardization)
    logger.info(f"Loaded {len(dataset)} precincts, {dataset.n_voters} voters, p={dataset.p} from {voters_file}")
    return dataset


def load_labels(labels_file: str, data: Dataset) -> LabeledDataset:
    """Attach per-voter labels to a dataset (matching on precinct_id, voter_id)."""
    frame = _read_csv(labels_file, ("precinct_id", "voter_id"))
    if tuple(frame.columns) != LABEL_COLUMNS:
        raise ValidationError(f"header must be {','.join(LABEL_COLUMNS)}", source=labels_file)
    values = pd.to_numeric(frame["label"], errors="coerce")
    bad = ~values.isin([0, 1]).to_numpy()
    if bad.any():
        row = int(np.flatnonzero(bad)[0]) + 2
        raise ValidationError("label must be 0 or 1", source=labels_file, row=row)
    lookup = dict(zip(zip(frame["precinct_id"], frame["voter_id"]), values.astype(int)))

    blocks = []
    for pr in data:
        try:
            blocks.append(np.array([lookup[(pr.id, vid)] for vid in pr.voter_ids], dtype=int))
        except KeyError as e:
            raise ValidationError(f"no label for voter {e.args[0]}", source=labels_file) from e
    return LabeledDataset(data, tuple(blocks))


def load_voters_for_prediction(voters_file: str, feature_names: Sequence[str],
                               standardization: Optional[Standardization]
                               ) -> List[Tuple[str, Tuple[str, ...], np.ndarray]]:
    """Per-precinct (id, voter ids, design matrix) with a stored standardization replayed."""
    voters, available = _read_voters(voters_file)
    raw_names = _require_columns([name for name in feature_names if name != INTERCEPT], available, voters_file)
    raw = voters[raw_names].to_numpy(dtype=float) if raw_names else np.zeros((len(voters), 0))
    if standardization is not None:
        raw = _replay(standardization, raw_names).apply(raw)
    design = np.column_stack([np.ones(len(voters)), raw]) if INTERCEPT in feature_names else raw

    blocks = []
    voter_ids = voters["voter_id"].to_numpy()
    for pid, rows in voters.groupby("precinct_id", sort=False).indices.items():
        blocks.append((str(pid), tuple(voter_ids[rows]), design[rows]))
    return blocks


def write_dataset(labeled: LabeledDataset, out_dir: str) -> Dict[str, str]:
    """Write voters.csv, counts.csv and labels.csv; floats round-trip exactly."""
    data = labeled.data
    os.makedirs(out_dir, exist_ok=True)
    has_intercept = bool(data.feature_names) and data.feature_names[0] == INTERCEPT
    start = 1 if has_intercept else 0
    features = list(data.feature_names[start:])

    stacked = data.stacked
    precinct_col = np.repeat([pr.id for pr in data], stacked.sizes)
    voter_col = [vid for pr in data for vid in pr.voter_ids]

    voters = pd.DataFrame({"precinct_id": precinct_col, "voter_id": voter_col})
    for k, name in enumerate(features, start=start):
        voters[name] = stacked.X[:, k]
    counts = pd.DataFrame({"precinct_id": data.ids, "size": stacked.sizes, "count": stacked.counts.astype(int)})
    labels = pd.DataFrame({"precinct_id": precinct_col, "voter_id": voter_col, "label": labeled.all_labels()})

    paths = {name: os.path.join(out_dir, f"{name}.csv") for name in ("voters", "counts", "labels")}
    voters.to_csv(paths["voters"], index=False, lineterminator="\n")
    counts.to_csv(paths["counts"], index=False, lineterminator="\n")
    labels.to_csv(paths["labels"], index=False, lineterminator="\n")
    logger.info(f"Wrote {len(data)} precincts / {data.n_voters} voters to {out_dir}")
    return paths


def split_dev(data: Dataset, n_dev: int, seed: int) -> Tuple[Dataset, Dataset]:
    """Seeded precinct-level holdout: returns (train, dev), both in input order."""
    n = len(data)
    if n_dev < 0 or (n_dev > 0 and n_dev >= n):
        raise DomainError(f"n_dev={n_dev} must be in [0, {n})")
    if n_dev == 0:
        return data, Dataset((), data.feature_names, data.standardization)
    order = np.random.default_rng(seed).permutation(n)
    dev_ids = {data.precincts[i].id for i in order[:n_dev]}
    train = Dataset(tuple(pr for pr in data if pr.id not in dev_ids), data.feature_names, data.standardization)
    dev = Dataset(tuple(pr for pr in data if pr.id in dev_ids), data.feature_names, data.standardization)
    return train, dev
