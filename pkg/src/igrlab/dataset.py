"""Multi-environment sample containers and CSV ingestion."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class MultiEnvDataset:
    """Raw per-environment samples sharing a covariate dimension.

    Parameters
    ----------
    environments : list of (X, y) pairs
        ``X`` is an (n_e, d) float array, ``y`` an (n_e,) float array.
    env_ids : list of str
        One identifier per environment, in order.
    """

    environments: list[tuple[np.ndarray, np.ndarray]]
    env_ids: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.environments:
            raise ValueError("dataset needs at least one environment")
        d = None
        envs = []
        for X, y in self.environments:
            X = np.asarray(X, dtype=float)
            y = np.asarray(y, dtype=float)
            if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
                raise ValueError("each environment needs X of shape (n, d) and y of shape (n,)")
            if X.shape[0] < 1:
                raise ValueError("empty environment")
            if d is None:
                d = X.shape[1]
            elif X.shape[1] != d:
                raise ValueError("environments disagree on the covariate dimension d")
            if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
                raise ValueError("non-finite entry in environment data")
            envs.append((X, y))
        object.__setattr__(self, "environments", envs)
        if not self.env_ids:
            object.__setattr__(self, "env_ids", [f"e{i + 1}" for i in range(len(envs))])
        elif len(self.env_ids) != len(envs):
            raise ValueError("env_ids length does not match the number of environments")

    @property
    def d(self) -> int:
        return self.environments[0][0].shape[1]

    @property
    def n_envs(self) -> int:
        return len(self.environments)

    def sample_sizes(self) -> list[int]:
        return [X.shape[0] for X, _ in self.environments]


def read_environment_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Read one environment from a CSV with header ``x1,...,xd,y``.

    UTF-8, decimal point, no thousands separators.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty CSV") from None
        header = [h.strip() for h in header]
        d = len(header) - 1
        expected = [f"x{j + 1}" for j in range(d)] + ["y"]
        if d < 1 or header != expected:
            raise ValueError(f"{path}: header must be x1,...,xd,y (got {header!r})")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 1:
                raise ValueError(f"{path}:{lineno}: expected {d + 1} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric field") from None
    if not rows:
        raise ValueError(f"{path}: no data rows")
    arr = np.asarray(rows, dtype=float)
    return arr[:, :d], arr[:, d]


def load_dataset_dir(directory: str | Path) -> MultiEnvDataset:
    """Load every ``*.csv`` in a directory as one environment each (sorted by name)."""
    directory = Path(directory)
    paths = sorted(directory.glob("*.csv"))
    if not paths:
        raise ValueError(f"no CSV files in {directory}")
    envs, ids = [], []
    for p in paths:
        X, y = read_environment_csv(p)
        envs.append((X, y))
        ids.append(p.stem)
    return MultiEnvDataset(envs, ids)


def write_environment_csv(path: str | Path, X: np.ndarray, y: np.ndarray) -> None:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j + 1}" for j in range(X.shape[1])] + ["y"])
        for i in range(X.shape[0]):
            writer.writerow([repr(float(v)) for v in X[i]] + [repr(float(y[i]))])
