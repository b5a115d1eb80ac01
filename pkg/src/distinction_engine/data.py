"""Dataset ingestion, stratified splitting, and train-statistics standardization.

Benchmark tables (UCI-derived) ship as CSV fixtures under
``distinction_engine/datasets``; see ``scripts/make_datasets.py`` for
their provenance.  CSV files need a header row; the label column is
selected by name or index and labels are densified to 0-based integers
in first-appearance order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

BUILTIN_DATASETS = {
    "iris": "iris.csv",
    "wine": "wine.csv",
    "bc": "breast_cancer.csv",
    "breast_cancer": "breast_cancer.csv",
    "digits": "digits.csv",
}


@dataclass(frozen=True)
class Dataset:
    name: str
    X: np.ndarray
    y: np.ndarray
    label_names: tuple[str, ...]

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.label_names)


@dataclass(frozen=True)
class Split:
    train: Dataset
    test: Dataset
    seed: int


def load_csv(path, label_column="label", name: str | None = None) -> Dataset:
    """Parse a headed CSV into features and dense integer labels.

    ``label_column`` selects the label field by header name or 0-based
    index.  Parse failures report the offending row and column.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, header row required") from None
        if isinstance(label_column, int):
            label_idx = label_column
            if not 0 <= label_idx < len(header):
                raise ValueError(f"{path}: label column index {label_idx} out of range")
        else:
            try:
                label_idx = header.index(label_column)
            except ValueError:
                raise ValueError(
                    f"{path}: no column named {label_column!r} in header"
                ) from None

        features: list[list[float]] = []
        labels: list[int] = []
        label_order: dict[str, int] = {}
        for row_num, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(
                    f"{path}: row {row_num} has {len(row)} fields, expected {len(header)}"
                )
            values = []
            for col, cell in enumerate(row):
                if col == label_idx:
                    continue
                try:
                    values.append(float(cell))
                except ValueError:
                    raise ValueError(
                        f"{path}: row {row_num}, column {col + 1}: "
                        f"cannot parse {cell!r} as a number"
                    ) from None
            raw = row[label_idx]
            if raw not in label_order:
                label_order[raw] = len(label_order)
            features.append(values)
            labels.append(label_order[raw])

    if not features:
        raise ValueError(f"{path}: no data rows")
    return Dataset(
        name=name or path.stem,
        X=np.asarray(features, dtype=float),
        y=np.asarray(labels, dtype=int),
        label_names=tuple(label_order),
    )


def load_builtin(name: str) -> Dataset:
    """One of the bundled benchmark tables: iris, wine, bc, digits."""
    key = name.lower()
    if key not in BUILTIN_DATASETS:
        raise ValueError(
            f"unknown dataset {name!r}; expected one of {sorted(BUILTIN_DATASETS)}"
        )
    ref = resources.files("distinction_engine") / "datasets" / BUILTIN_DATASETS[key]
    with resources.as_file(ref) as path:
        return load_csv(path, name=key if key != "bc" else "breast_cancer")


def load_dataset(name_or_path: str) -> Dataset:
    """Builtin dataset by name, or any CSV by path."""
    if name_or_path.lower() in BUILTIN_DATASETS:
        return load_builtin(name_or_path)
    return load_csv(name_or_path)


def stratified_split(ds: Dataset, train_fraction: float, seed: int) -> Split:
    """Deterministic per-class split preserving class proportions.

    Every class must have at least two samples so both partitions stay
    populated.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    train_idx: list[int] = []
    test_idx: list[int] = []
    for cls in range(ds.n_classes):
        members = np.flatnonzero(ds.y == cls)
        if members.size < 2:
            raise ValueError(
                f"class {cls} has {members.size} sample(s); need at least 2 to split"
            )
        members = members[rng.permutation(members.size)]
        k = int(round(train_fraction * members.size))
        k = min(max(k, 1), members.size - 1)
        train_idx.extend(members[:k].tolist())
        test_idx.extend(members[k:].tolist())
    train_idx.sort()
    test_idx.sort()

    def subset(indices) -> Dataset:
        idx = np.asarray(indices, dtype=int)
        return Dataset(ds.name, ds.X[idx].copy(), ds.y[idx].copy(), ds.label_names)

    return Split(train=subset(train_idx), test=subset(test_idx), seed=seed)


STD_FLOOR = 1e-12


def standardize(split: Split) -> Split:
    """Zero-mean unit-variance transform fit on the train partition only.

    Constant features map to all zeros on train via the std floor.
    """
    mean = split.train.X.mean(axis=0)
    std = split.train.X.std(axis=0)
    std = np.maximum(std, STD_FLOOR)

    def transform(ds: Dataset) -> Dataset:
        return Dataset(ds.name, (ds.X - mean) / std, ds.y.copy(), ds.label_names)

    return Split(train=transform(split.train), test=transform(split.test), seed=split.seed)
