"""K-nearest-neighbour activity classifier on z-standardized features."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError
from .features import FEATURE_NAMES, StandardizationStats, apply_standardizer, fit_standardizer
from .labels import COARSE_LABELS, CoarseLabel, to_coarse

_CLASS_RANK = {c: i for i, c in enumerate(COARSE_LABELS)}


@dataclass(frozen=True)
class KnnModel:
    X: np.ndarray  # standardized training rows, selected columns only
    labels: tuple  # CoarseLabel per row
    k: int
    stats: StandardizationStats
    feature_names: tuple

    def __post_init__(self):
        if self.k < 1 or self.k % 2 == 0:
            raise ConfigError("k must be odd and at least 1")
        if self.X.shape != (len(self.labels), len(self.feature_names)):
            raise DataError("training matrix shape disagrees with labels or feature names")

    def to_manifest(self) -> dict:
        return {"k": self.k, "feature_names": list(self.feature_names),
                "standardizer": self.stats.to_dict(), "n_rows": len(self.labels),
                "metric": "euclidean"}

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "model.json").write_text(json.dumps(self.to_manifest(), indent=2, sort_keys=True))
        with open(directory / "training.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(list(self.feature_names) + ["label"])
            for row, lab in zip(self.X, self.labels):
                wr.writerow([repr(float(v)) for v in row] + [lab.value])

    @classmethod
    def load(cls, directory) -> "KnnModel":
        directory = Path(directory)
        try:
            man = json.loads((directory / "model.json").read_text())
        except FileNotFoundError:
            raise DataError(f"{directory}: no model.json") from None
        names = tuple(man["feature_names"])
        rows, labels = [], []
        with open(directory / "training.csv", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(header[:-1]) != names:
                raise DataError("training.csv columns disagree with model.json")
            for row in reader:
                rows.append([float(v) for v in row[:-1]])
                labels.append(CoarseLabel(row[-1]))
        return cls(np.array(rows).reshape(len(rows), len(names)), tuple(labels), int(man["k"]),
                   StandardizationStats.from_dict(man["standardizer"]), names)


def _select(matrix, selected: Sequence[str], names: Sequence[str]) -> np.ndarray:
    X = np.asarray(matrix, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] == len(selected) and len(names) != len(selected):
        return X
    if X.shape[1] != len(names):
        raise DataError(f"expected {len(names)} or {len(selected)} feature columns, got {X.shape[1]}")
    index = {n: i for i, n in enumerate(names)}
    try:
        cols = [index[s] for s in selected]
    except KeyError as exc:
        raise DataError(f"unknown feature {exc.args[0]!r}") from None
    return X[:, cols]


def train(matrix, fine_labels, selected_features: Sequence[str], k: int = 5,
          names: Sequence[str] = FEATURE_NAMES) -> KnnModel:
    """Fit the standardizer on the training rows and store them.

    ``matrix`` holds either the full catalog columns (``names``) or just
    the selected ones. Labels may be fine or coarse; they are stored coarse.
    """
    selected = tuple(selected_features)
    if not selected:
        raise DataError("no features selected")
    X = _select(matrix, selected, names)
    if X.shape[0] != len(fine_labels):
        raise DataError("label count differs from row count")
    if X.shape[0] < k:
        raise DataError(f"need at least k={k} training rows, got {X.shape[0]}")
    if not np.all(np.isfinite(X)):
        raise DataError("training matrix contains non-finite values")
    stats = fit_standardizer(X)
    labels = tuple(to_coarse(v) for v in fine_labels)
    return KnnModel(apply_standardizer(stats, X), labels, k, stats, selected)


def _vote(dist_sorted: np.ndarray, labs: Sequence[CoarseLabel]) -> CoarseLabel:
    counts: dict[CoarseLabel, int] = {}
    sums: dict[CoarseLabel, float] = {}
    for d, lab in zip(dist_sorted, labs):
        counts[lab] = counts.get(lab, 0) + 1
        sums[lab] = sums.get(lab, 0.0) + float(d)
    top = max(counts.values())
    tied = [c for c in counts if counts[c] == top]
    if len(tied) == 1:
        return tied[0]
    best_sum = min(sums[c] for c in tied)
    tied = [c for c in tied if sums[c] == best_sum]
    if len(tied) == 1:
        return tied[0]
    if labs[0] in tied:
        return labs[0]
    return min(tied, key=_CLASS_RANK.__getitem__)


def predict_matrix(model: KnnModel, matrix, names: Sequence[str] = FEATURE_NAMES) -> list[CoarseLabel]:
    """Majority label of the ``k`` nearest training rows for each query row.

    Equidistant rows at the k-boundary are taken in training order. Vote
    ties go to the smallest summed neighbour distance, then to the nearest
    neighbour's class, then to the fixed class order.
    """
    Q = _select(matrix, model.feature_names, names)
    if not np.all(np.isfinite(Q)):
        raise DataError("query contains non-finite features")
    Z = apply_standardizer(model.stats, Q)
    idx = np.arange(model.X.shape[0])
    out = []
    for z in Z:
        d = np.sqrt(((model.X - z) ** 2).sum(axis=1))
        near = np.lexsort((idx, d))[:model.k]
        out.append(_vote(d[near], [model.labels[i] for i in near]))
    return out


def predict(model: KnnModel, features, names: Sequence[str] = FEATURE_NAMES) -> CoarseLabel:
    """Coarse label for one feature vector (full catalog or selected columns)."""
    return predict_matrix(model, np.asarray(features, dtype=float)[None, :], names)[0]
