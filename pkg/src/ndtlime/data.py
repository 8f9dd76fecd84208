"""Tabular dataset loading, standardization, splitting, and synthetic generators."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

TASKS = ("regression", "classification")

_BUNDLED = {
    "iris": Path(__file__).parent / "datasets" / "iris.csv",
    "wine": Path(__file__).parent / "datasets" / "wine.csv",
}


@dataclass(frozen=True)
class Scaler:
    """Per-feature location and scale estimated on a training split.

    Columns with zero variance keep std 0 and are mapped to 0 by transform,
    so constant slices (one-hot remnants and the like) never divide by zero.
    """

    mean: np.ndarray
    std: np.ndarray

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        safe = np.where(self.std > 0, self.std, 1.0)
        Z = (X - self.mean) / safe
        return np.where(self.std > 0, Z, 0.0)


@dataclass(frozen=True)
class Dataset:
    """Feature matrix plus targets, with the training scaler attached after splitting."""

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...]
    task: str
    scaler: Scaler | None = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if self.X.ndim != 2:
            raise ValueError("X must be 2-d")
        n, d = self.X.shape
        if len(self.y) != n:
            raise ValueError("targets length does not match row count")
        if len(self.feature_names) != d:
            raise ValueError("feature_names length does not match column count")
        if self.task == "classification":
            y = np.asarray(self.y)
            if y.size and (y.min() < 0 or not np.issubdtype(y.dtype, np.integer)):
                raise ValueError("classification targets must be integers in [0, C)")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> int:
        if self.task != "classification":
            return 0
        return int(self.y.max()) + 1 if self.y.size else 0


def bundled_path(name: str) -> Path:
    if name not in _BUNDLED:
        raise ValueError(f"no bundled dataset named {name!r}; have {sorted(_BUNDLED)}")
    return _BUNDLED[name]


def load_csv(path, target_column="target", task: str = "auto") -> Dataset:
    """Load a UTF-8 comma-separated file with one header row.

    target_column selects the target by name or by integer position. With
    task="auto" the target is treated as classification when every value is
    integral, regression otherwise. Classification labels are remapped to
    0..C-1 in sorted order. Row order is preserved and no scaling is applied.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r]
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if isinstance(target_column, int):
        if not -len(header) <= target_column < len(header):
            raise ValueError(f"{path}: target index {target_column} out of range")
        t_idx = target_column % len(header)
    else:
        if target_column not in header:
            raise ValueError(
                f"{path}: unknown target column {target_column!r}; "
                f"columns are {header}"
            )
        t_idx = header.index(target_column)
    feature_names = tuple(h for i, h in enumerate(header) if i != t_idx)

    data_rows = rows[1:]
    if len(data_rows) < 2:
        raise ValueError(f"{path}: need at least 2 data rows, found {len(data_rows)}")

    n, d = len(data_rows), len(header) - 1
    X = np.empty((n, d), dtype=float)
    t_raw = np.empty(n, dtype=float)
    for i, row in enumerate(data_rows):
        if len(row) != len(header):
            raise ValueError(
                f"{path}: row {i + 2} has {len(row)} cells, expected {len(header)}"
            )
        col = 0
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise ValueError(
                    f"{path}: cannot parse {cell!r} at row {i + 2}, "
                    f"column {header[j]!r}"
                ) from None
            if j == t_idx:
                t_raw[i] = v
            else:
                X[i, col] = v
                col += 1

    integral = bool(np.all(t_raw == np.round(t_raw)))
    if task == "auto":
        task = "classification" if integral else "regression"
    if task == "classification":
        if not integral:
            raise ValueError(f"{path}: classification target has non-integer values")
        labels = np.unique(t_raw.astype(np.int64))
        remap = {v: i for i, v in enumerate(labels.tolist())}
        y = np.array([remap[int(v)] for v in t_raw], dtype=np.int64)
    elif task == "regression":
        y = t_raw
    else:
        raise ValueError(f"unknown task {task!r}")
    return Dataset(X=X, y=y, feature_names=feature_names, task=task)


def standardize_split(
    data: Dataset, test_fraction: float, seed: int
) -> tuple[Dataset, Dataset]:
    """Shuffle, split, and z-score both parts with statistics from the train part."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n = data.n
    n_test = int(round(n * test_fraction))
    if n_test < 1 or n - n_test < 2:
        raise ValueError(
            f"split of n={n} at test_fraction={test_fraction} leaves too few rows"
        )
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    test_idx, train_idx = perm[:n_test], perm[n_test:]

    X_train = data.X[train_idx]
    scaler = Scaler(mean=X_train.mean(axis=0), std=X_train.std(axis=0))
    train = Dataset(
        X=scaler.transform(X_train),
        y=data.y[train_idx],
        feature_names=data.feature_names,
        task=data.task,
        scaler=scaler,
    )
    test = Dataset(
        X=scaler.transform(data.X[test_idx]),
        y=data.y[test_idx],
        feature_names=data.feature_names,
        task=data.task,
        scaler=scaler,
    )
    return train, test


def synth_friedman1(n: int, noise_std: float = 0.0, seed: int = 0) -> Dataset:
    """Ten uniform features; the target uses only the first five.

    y = 10 sin(pi x1 x2) + 20 (x3 - 0.5)^2 + 10 x4 + 5 x5 + noise.
    """
    if n < 10:
        raise ValueError("synth_friedman1 needs n >= 10")
    if noise_std < 0:
        raise ValueError("noise_std must be nonnegative")
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(n, 10))
    y = (
        10.0 * np.sin(np.pi * X[:, 0] * X[:, 1])
        + 20.0 * (X[:, 2] - 0.5) ** 2
        + 10.0 * X[:, 3]
        + 5.0 * X[:, 4]
    )
    if noise_std > 0:
        y = y + noise_std * rng.standard_normal(n)
    names = tuple(f"x{i + 1}" for i in range(10))
    return Dataset(X=X, y=y, feature_names=names, task="regression")


def synth_blobs(
    n: int, d: int = 2, C: int = 2, separation: float = 4.0, seed: int = 0
) -> Dataset:
    """Near-balanced Gaussian clusters with centers spaced along axis 0.

    Cluster c is isotropic with standard deviation 1 + c/2. Equal-scale
    clusters would make the log-odds surface exactly affine, a degenerate
    stand-in for real classification data; distinct scales keep the optimal
    decision surface curved while the clusters stay cleanly separable at
    moderate separation.
    """
    if n < 2 * C:
        raise ValueError("synth_blobs needs n >= 2 C")
    if separation <= 0:
        raise ValueError("separation must be positive")
    rng = np.random.default_rng(seed)
    base, extra = divmod(n, C)
    counts = [base + (1 if c < extra else 0) for c in range(C)]
    y = np.repeat(np.arange(C, dtype=np.int64), counts)
    centers = np.zeros((C, d))
    centers[:, 0] = separation * np.arange(C)
    spreads = 1.0 + 0.5 * np.arange(C)
    X = centers[y] + rng.standard_normal((n, d)) * spreads[y][:, None]
    perm = rng.permutation(n)
    names = tuple(f"x{i + 1}" for i in range(d))
    return Dataset(X=X[perm], y=y[perm], feature_names=names, task="classification")
