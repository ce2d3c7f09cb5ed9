"""Ingestion, cleaning, standardization, splitting and synthesis of binary tabular data."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class DataError(ValueError):
    """Input data violates a Dataset precondition."""


@dataclass(frozen=True)
class Standardization:
    mean: np.ndarray
    std: np.ndarray
    zero_variance: np.ndarray  # bool mask, columns whose std was 0

    def apply(self, X: np.ndarray) -> np.ndarray:
        scale = np.where(self.zero_variance, 1.0, self.std)
        out = (np.asarray(X, dtype=float) - self.mean) / scale
        out[:, self.zero_variance] = 0.0
        return out

    def invert(self, Z: np.ndarray) -> np.ndarray:
        scale = np.where(self.zero_variance, 0.0, self.std)
        return np.asarray(Z, dtype=float) * scale + self.mean

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "zero_variance": self.zero_variance.tolist(),
            "ddof": 1,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Standardization":
        return cls(
            np.asarray(d["mean"], dtype=float),
            np.asarray(d["std"], dtype=float),
            np.asarray(d["zero_variance"], dtype=bool),
        )


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]
    standardization: Standardization | None = None
    name: str = "dataset"

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels)
        if X.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise DataError(f"labels length {y.shape} does not match {X.shape[0]} rows")
        if not np.all(np.isfinite(X)):
            raise DataError("features contain non-finite entries")
        if not np.all((y == 0) | (y == 1)):
            raise DataError("labels must be 0 or 1")
        if len(self.feature_names) != X.shape[1]:
            raise DataError("feature_names length does not match column count")
        y = y.astype(np.int64)
        if y.size and (y.min() == y.max()):
            raise DataError("dataset contains a single class")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def n_pos(self) -> int:
        return int(self.labels.sum())

    @property
    def n_neg(self) -> int:
        return self.n - self.n_pos

    def take(self, idx) -> "Dataset":
        return Dataset(self.features[idx], self.labels[idx], self.feature_names,
                       self.standardization, self.name)


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.2
    stratified: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise DataError(f"test_fraction must lie in (0, 1), got {self.test_fraction}")


def _parse_float(cell: str) -> float | None:
    cell = cell.strip()
    if not cell:
        return None
    try:
        v = float(cell)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def load_csv(path, label_column: str, positive_value: str, name: str | None = None) -> Dataset:
    """Read a headered CSV, dropping every row with an empty or unparseable cell.

    Labels equal to ``positive_value`` (string comparison after stripping) map to 1,
    anything else to 0.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"input file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file, header row missing") from None
        if label_column not in header:
            raise DataError(f"{path}: label column {label_column!r} not in header")
        li = header.index(label_column)
        names = [h for i, h in enumerate(header) if i != li]
        rows, labels = [], []
        for rec in reader:
            if len(rec) != len(header):
                continue
            lab = rec[li].strip()
            if not lab:
                continue
            vals = [_parse_float(c) for i, c in enumerate(rec) if i != li]
            if any(v is None for v in vals):
                continue
            rows.append(vals)
            labels.append(1 if lab == positive_value.strip() else 0)
    if not rows:
        raise DataError(f"{path}: no rows survive cleaning")
    y = np.asarray(labels, dtype=np.int64)
    if y.min() == y.max():
        raise DataError(f"{path}: only one class present after cleaning")
    X = np.asarray(rows, dtype=float).reshape(len(rows), len(names))
    return Dataset(X, y, names, name=name or path.stem)


def imbalance_ratio(ds: Dataset) -> float:
    """Majority count over minority count (always >= 1)."""
    pos, neg = ds.n_pos, ds.n_neg
    if pos == 0 or neg == 0:
        raise DataError("imbalance ratio needs both classes")
    return max(pos, neg) / min(pos, neg)


def standardize(ds: Dataset) -> Dataset:
    if ds.standardization is not None:
        raise DataError("dataset is already standardized")
    X = ds.features
    mean = X.mean(axis=0)
    std = X.std(axis=0, ddof=1) if ds.n > 1 else np.zeros(ds.d)
    zero = ~(std > 0)
    st = Standardization(mean, std, zero)
    return Dataset(st.apply(X), ds.labels, ds.feature_names, st, ds.name)


def _class_split_counts(n_pos: int, n: int, k: int) -> int:
    return max(1, int(round(k * n_pos / n)))


def split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Seeded partition into (train, test); stratified mode splits each class separately."""
    n = ds.n
    if n < 4:
        raise DataError("split needs at least 4 rows")
    n_test = int(round(n * spec.test_fraction))
    if not 0 < n_test < n:
        raise DataError(f"test size {n_test} leaves an empty side")
    rng = np.random.default_rng(spec.seed)
    if spec.stratified:
        pos = np.flatnonzero(ds.labels == 1)
        neg = np.flatnonzero(ds.labels == 0)
        if pos.size < 2 or neg.size < 2:
            raise DataError("stratified split needs at least 2 members per class")
        t_pos = min(max(1, int(round(n_test * pos.size / n))), pos.size - 1)
        t_neg = n_test - t_pos
        if not 1 <= t_neg <= neg.size - 1:
            raise DataError("stratified split cannot keep both classes on both sides")
        pos = rng.permutation(pos)
        neg = rng.permutation(neg)
        test_idx = np.concatenate([pos[:t_pos], neg[:t_neg]])
        train_idx = np.concatenate([pos[t_pos:], neg[t_neg:]])
    else:
        perm = rng.permutation(n)
        test_idx, train_idx = perm[:n_test], perm[n_test:]
    test_idx.sort()
    train_idx.sort()
    for side, idx in (("train", train_idx), ("test", test_idx)):
        if ds.labels[idx].min() == ds.labels[idx].max():
            raise DataError(f"unstratified split left the {side} side with a single class")
    return ds.take(train_idx), ds.take(test_idx)


def random_subset(ds: Dataset, m: int, stratified: bool = True, seed: int = 0) -> Dataset:
    """m rows without replacement; stratified keeps max(1, round(m * N_pos / N)) positives."""
    if not 1 <= m <= ds.n:
        raise DataError(f"subset size {m} outside [1, {ds.n}]")
    rng = np.random.default_rng(seed)
    if not stratified:
        return ds.take(rng.permutation(ds.n)[:m])
    if m < 2:
        raise DataError("stratified subset needs m >= 2")
    pos = np.flatnonzero(ds.labels == 1)
    neg = np.flatnonzero(ds.labels == 0)
    k_pos = min(_class_split_counts(pos.size, ds.n, m), pos.size, m - 1)
    k_neg = m - k_pos
    if k_neg > neg.size:
        k_neg = neg.size
        k_pos = m - k_neg
    idx = np.concatenate([rng.permutation(pos)[:k_pos], rng.permutation(neg)[:k_neg]])
    return ds.take(rng.permutation(idx))


def gen_synthetic(n: int, d: int, ir: float, separation: float, seed: int = 0) -> Dataset:
    """Two unit-covariance Gaussian classes whose means differ by ``separation`` along a
    random unit direction. Positives (the minority) number max(1, round(n / (1 + ir)))."""
    if n < 10 or d < 1 or ir < 1 or separation < 0:
        raise DataError("gen_synthetic needs n >= 10, d >= 1, ir >= 1, separation >= 0")
    rng = np.random.default_rng(seed)
    n_pos = max(1, int(round(n / (1.0 + ir))))
    n_pos = min(n_pos, n - 1)
    direction = rng.standard_normal(d)
    direction /= np.linalg.norm(direction)
    y = np.zeros(n, dtype=np.int64)
    y[rng.permutation(n)[:n_pos]] = 1
    X = rng.standard_normal((n, d))
    X += np.outer(y - 0.5, direction) * separation
    names = [f"x{i}" for i in range(d)]
    return Dataset(X, y, names, name=f"synthetic_n{n}_d{d}_ir{ir:g}_sep{separation:g}_s{seed}")


def class_counts(ds: Dataset) -> dict:
    return {"positive": ds.n_pos, "negative": ds.n_neg}


def dataset_sidecar(ds: Dataset) -> dict:
    return {
        "name": ds.name,
        "n": ds.n,
        "d": ds.d,
        "feature_names": list(ds.feature_names),
        "class_counts": class_counts(ds),
        "imbalance_ratio": imbalance_ratio(ds),
        "standardization": None if ds.standardization is None else ds.standardization.to_dict(),
    }


def write_dataset_csv(ds: Dataset, fh, label_column: str = "label") -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(list(ds.feature_names) + [label_column])
    for row, lab in zip(ds.features, ds.labels):
        w.writerow([repr(float(v)) for v in row] + [int(lab)])


def sidecar_json(ds: Dataset) -> str:
    return json.dumps(dataset_sidecar(ds), indent=2, sort_keys=True) + "\n"
