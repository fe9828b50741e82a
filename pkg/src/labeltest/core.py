"""Shared data types: pools with a label oracle, budgets, decisions, dataset I/O."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


class LabelTestError(Exception):
    """Base class for all errors raised by this package."""


class OutOfRange(LabelTestError, IndexError):
    pass


class AlreadyQueried(LabelTestError):
    pass


class PoolExhausted(LabelTestError):
    pass


class DimensionMismatch(LabelTestError, ValueError):
    pass


class LengthMismatch(LabelTestError, ValueError):
    pass


class BudgetExceedsPool(LabelTestError, ValueError):
    pass


class DatasetError(LabelTestError, ValueError):
    pass


def as_features(x: Sequence | np.ndarray) -> np.ndarray:
    """Return a contiguous float64 array of shape (n, d); a 1-D input is one column."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[1] < 1:
        raise DimensionMismatch(f"features must be 2-D (n, d) with d >= 1, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("features must be finite")
    return np.ascontiguousarray(arr)


def as_labels(z: Sequence | np.ndarray) -> np.ndarray:
    arr = np.asarray(z)
    if arr.ndim != 1:
        raise ValueError("labels must be 1-D")
    if arr.size and not np.all((arr == 0) | (arr == 1)):
        raise ValueError("labels must be 0 or 1")
    return arr.astype(np.int8)


class UnlabeledPool:
    """Feature vectors whose labels can only be read through :meth:`query`.

    Indices are the identity of a sample; selections elsewhere in the package
    return indices into ``features``.
    """

    def __init__(self, features, hidden_labels):
        self.features = as_features(features)
        self.features.setflags(write=False)
        labels = as_labels(hidden_labels)
        if labels.shape[0] != self.features.shape[0]:
            raise LengthMismatch("features and labels differ in length")
        self.__labels = labels
        self._queried = np.zeros(self.n, dtype=bool)
        self.n_queries = 0

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return self.n

    @property
    def queried(self) -> np.ndarray:
        view = self._queried.view()
        view.setflags(write=False)
        return view

    def unqueried_indices(self) -> np.ndarray:
        return np.flatnonzero(~self._queried)

    @property
    def n_unqueried(self) -> int:
        return self.n - int(self._queried.sum())

    def query(self, index: int) -> int:
        index = int(index)
        if not 0 <= index < self.n:
            raise OutOfRange(f"index {index} outside pool of size {self.n}")
        if self._queried[index]:
            raise AlreadyQueried(f"index {index} was already queried")
        self._queried[index] = True
        self.n_queries += 1
        return int(self.__labels[index])

    def copy(self) -> "UnlabeledPool":
        """Fresh pool over the same data with no queries made."""
        return UnlabeledPool(self.features, self.__labels)


def query_oracle(pool: UnlabeledPool, index: int) -> int:
    return pool.query(index)


@dataclass(frozen=True)
class Budget:
    n_init: int
    n_total: int

    def __post_init__(self):
        if self.n_init < 1:
            raise ValueError(f"n_init must be >= 1, got {self.n_init}")
        if self.n_init >= self.n_total:
            raise BudgetExceedsPool(f"n_init={self.n_init} leaves no budget out of n_total={self.n_total}")

    def check(self, pool: UnlabeledPool) -> None:
        if self.n_total > pool.n:
            raise BudgetExceedsPool(f"budget {self.n_total} exceeds pool size {pool.n}")

    @classmethod
    def with_default_init(cls, n_total: int) -> "Budget":
        return cls(default_n_init(n_total), n_total)


def default_n_init(n_total: int) -> int:
    n0 = max(10, int(round(n_total / 5)))
    return min(n0, n_total - 1)


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return alpha


class Outcome(str, enum.Enum):
    REJECT = "RejectH0"
    RETAIN = "RetainH0"


@dataclass(frozen=True)
class Decision:
    outcome: Outcome
    labels_used: int
    stop_step: int | None = None

    @property
    def rejected(self) -> bool:
        return self.outcome is Outcome.REJECT


@dataclass
class LabeledSet:
    """Labeled pairs in query order."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.features = as_features(self.features)
        self.labels = as_labels(self.labels)
        if self.features.shape[0] != self.labels.shape[0]:
            raise LengthMismatch("features and labels differ in length")

    def __len__(self) -> int:
        return self.labels.shape[0]

    @classmethod
    def from_pairs(cls, pairs) -> "LabeledSet":
        pairs = list(pairs)
        if not pairs:
            raise ValueError("no pairs")
        feats = [np.atleast_1d(np.asarray(s, dtype=np.float64)) for s, _ in pairs]
        return cls(np.vstack(feats), [z for _, z in pairs])


def split_by_label(s: LabeledSet) -> tuple[np.ndarray, np.ndarray]:
    """Class-0 and class-1 features, each in original order."""
    if len(s) == 0:
        raise ValueError("labeled set is empty")
    return s.features[s.labels == 0], s.features[s.labels == 1]


def load_dataset(path: str | Path) -> UnlabeledPool:
    """Read a CSV with columns f1..fd and a final ``z`` column."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if len(header) < 2 or header[-1] != "z":
            raise DatasetError(f"{path}: last column must be 'z', got header {header}")
        d = len(header) - 1
        expected = [f"f{i + 1}" for i in range(d)]
        if header[:-1] != expected:
            raise DatasetError(f"{path}: feature columns must be {expected}")
        feats, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 1:
                raise DatasetError(f"{path}:{lineno}: expected {d + 1} fields, got {len(row)}")
            try:
                x = [float(v) for v in row[:-1]]
                z = int(row[-1])
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from None
            if z not in (0, 1):
                raise DatasetError(f"{path}:{lineno}: label must be 0 or 1")
            if not all(math.isfinite(v) for v in x):
                raise DatasetError(f"{path}:{lineno}: non-finite feature")
            feats.append(x)
            labels.append(z)
    if not feats:
        raise DatasetError(f"{path}: no rows")
    return UnlabeledPool(np.asarray(feats), labels)


def save_dataset(path: str | Path, features, labels) -> None:
    X = as_features(features)
    z = as_labels(labels)
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"f{i + 1}" for i in range(X.shape[1])] + ["z"])
        for row, lab in zip(X, z):
            w.writerow([repr(float(v)) for v in row] + [int(lab)])


def load_labeled(path: str | Path) -> LabeledSet:
    """Read a dataset CSV as a fully labeled set (every label is revealed)."""
    pool = load_dataset(path)
    labels = [pool.query(i) for i in range(pool.n)]
    return LabeledSet(pool.features, labels)
