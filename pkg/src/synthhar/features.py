"""Time-domain window features and z-standardization.

Per sensor and axis: mean, standard deviation, RMS, minimum, maximum,
interquartile range, skewness, kurtosis and mean-crossing rate. Per sensor:
the three axial correlations and the signal vector magnitude of the
high-pass filtered window. Two sensors give 2 * (27 + 4) = 62 features.

Names follow ``<stat>_<axis>_<sensor>`` (``rms_x_ut``), ``corr_<ab>_<sensor>``
and ``svm_<sensor>``, with ``ut`` the upper thigh and ``lb`` the lower back.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError
from .labels import fine
from .signal import NOMINAL_RATE_HZ, LabeledWindow, Origin, Sensor, highpass_zero_phase_array

AXIS_STATS = ("mean", "std", "rms", "min", "max", "iqr", "skew", "kurt", "mcr")
AXES = ("x", "y", "z")
PAIRS = ((0, 1), (0, 2), (1, 2))
SENSOR_TAGS = ("ut", "lb")
SVM_CUTOFF_HZ = 0.5
SVM_ORDER = 4


def _sensor_names(tag: str) -> list[str]:
    names = [f"{s}_{a}_{tag}" for s in AXIS_STATS for a in AXES]
    names += [f"corr_{AXES[i]}{AXES[j]}_{tag}" for i, j in PAIRS]
    names.append(f"svm_{tag}")
    return names


FEATURE_NAMES: tuple[str, ...] = tuple(_sensor_names("ut") + _sensor_names("lb"))
N_FEATURES = len(FEATURE_NAMES)
FEATURES_PER_SENSOR = N_FEATURES // 2
assert N_FEATURES == 62

META_COLUMNS = ("participant", "label", "origin")


def feature_index(name: str) -> int:
    try:
        return FEATURE_NAMES.index(name)
    except ValueError:
        raise KeyError(f"unknown feature {name!r}") from None


def axis_statistics(block: np.ndarray) -> np.ndarray:
    """Per-axis statistics and axial correlations (30 columns).

    Parameters
    ----------
    block : ndarray, shape (n_windows, n_samples, 3)

    Returns
    -------
    ndarray, shape (n_windows, 30)
        Nine statistics for x, y, z (stat-major), then corr xy, xz, yz.
    """
    a = np.asarray(block, dtype=float)
    if a.ndim != 3 or a.shape[2] != 3:
        raise DataError(f"expected (windows, samples, 3), got {a.shape}")
    n = a.shape[1]
    if n < 2:
        raise DataError("features need at least two samples per window")
    mu = a.mean(axis=1)
    dev = a - mu[:, None, :]
    constant = np.ptp(a, axis=1) == 0
    dev = np.where(constant[:, None, :], 0.0, dev)
    m2 = (dev ** 2).sum(axis=1)
    sigma = np.sqrt(m2 / (n - 1))
    safe = np.where(constant | (sigma == 0), 1.0, sigma)
    # standardize before raising to powers so tiny spreads do not underflow
    z = dev / safe[:, None, :]
    skew = (z ** 3).sum(axis=1) / (n - 1)
    kurt = (z ** 4).sum(axis=1) / (n - 1)
    rms = np.sqrt((a ** 2).mean(axis=1))
    q1, q3 = np.percentile(a, [25, 75], axis=1)
    sg = np.sign(dev)
    mcr = 0.5 * np.abs(np.diff(sg, axis=1)).sum(axis=1)
    per_axis = [mu, sigma, rms, a.min(axis=1), a.max(axis=1), q3 - q1, skew, kurt, mcr]

    corr = []
    for i, j in PAIRS:
        ok = ~(constant[:, i] | constant[:, j])
        r = np.where(ok, (z[:, :, i] * z[:, :, j]).sum(axis=1) / (n - 1), 0.0)
        corr.append(np.clip(r, -1.0, 1.0))
    return np.column_stack(per_axis + corr)


def signal_vector_magnitude(block: np.ndarray, rate_hz: float,
                            cutoff_hz: float = SVM_CUTOFF_HZ, order: int = SVM_ORDER) -> np.ndarray:
    """Mean Euclidean norm of the high-passed samples, one value per window."""
    a = np.asarray(block, dtype=float)
    # filter along the sample axis for all windows and axes at once
    hp = highpass_zero_phase_array(np.moveaxis(a, 1, 0), rate_hz, cutoff_hz, order)
    return np.sqrt((hp ** 2).sum(axis=2)).mean(axis=0)


def sensor_features(block: np.ndarray, rate_hz: float,
                    cutoff_hz: float = SVM_CUTOFF_HZ, order: int = SVM_ORDER) -> np.ndarray:
    """31 features for a batch of windows from one sensor.

    Parameters
    ----------
    block : ndarray, shape (n_windows, n_samples, 3)
    rate_hz : float
        Sampling rate, used only by the high-pass filter ahead of the SVM.

    Returns
    -------
    ndarray, shape (n_windows, 31)
    """
    stats = axis_statistics(block)
    return np.column_stack([stats, signal_vector_magnitude(block, rate_hz, cutoff_hz, order)])


def _stack(windows: Sequence[LabeledWindow]) -> tuple[np.ndarray, np.ndarray]:
    thigh = np.stack([w.thigh for w in windows])
    back = np.stack([w.back for w in windows])
    return thigh, back


def extract(window: LabeledWindow) -> np.ndarray:
    """62 features of one window in catalog order."""
    return extract_matrix([window])[0]


def extract_matrix(windows: Sequence[LabeledWindow], batch: int = 4096) -> np.ndarray:
    """Feature matrix with one row per window.

    Windows are grouped by slice length so mixed-length inputs still batch.
    """
    if len(windows) == 0:
        raise DataError("no windows to extract features from")
    out = np.empty((len(windows), N_FEATURES))
    groups: dict[tuple[int, int], list[int]] = {}
    for i, w in enumerate(windows):
        groups.setdefault((w.thigh.shape[0], w.back.shape[0]), []).append(i)
    rate_t = NOMINAL_RATE_HZ[Sensor.UPPER_THIGH]
    rate_b = NOMINAL_RATE_HZ[Sensor.LOWER_BACK]
    for idx in groups.values():
        for s in range(0, len(idx), batch):
            rows = idx[s:s + batch]
            thigh, back = _stack([windows[i] for i in rows])
            out[rows, :FEATURES_PER_SENSOR] = sensor_features(thigh, rate_t)
            out[rows, FEATURES_PER_SENSOR:] = sensor_features(back, rate_b)
    if not np.all(np.isfinite(out)):
        raise DataError("non-finite feature value")
    return out


@dataclass
class FeatureTable:
    """Feature matrix with per-row provenance."""
    X: np.ndarray
    labels: list  # FineLabel per row
    participants: list
    origins: list  # Origin per row
    names: tuple = FEATURE_NAMES

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        n = self.X.shape[0]
        if self.X.ndim != 2 or self.X.shape[1] != len(self.names):
            raise DataError(f"matrix shape {self.X.shape} does not match {len(self.names)} names")
        if not (len(self.labels) == len(self.participants) == len(self.origins) == n):
            raise DataError("row metadata lengths differ from the matrix")
        self.labels = [fine(v) for v in self.labels]
        self.origins = [Origin(v) for v in self.origins]
        self.participants = [str(p) for p in self.participants]

    def __len__(self) -> int:
        return self.X.shape[0]

    @classmethod
    def from_windows(cls, windows: Sequence[LabeledWindow]) -> "FeatureTable":
        return cls(extract_matrix(windows), [w.label for w in windows],
                   [w.participant_id for w in windows], [w.origin for w in windows])

    def subset(self, rows) -> "FeatureTable":
        rows = np.asarray(rows, dtype=int)
        return FeatureTable(self.X[rows], [self.labels[i] for i in rows],
                            [self.participants[i] for i in rows], [self.origins[i] for i in rows],
                            self.names)

    def columns(self, names: Sequence[str]) -> np.ndarray:
        idx = [self.names.index(n) for n in names]
        return self.X[:, idx]

    def label_array(self) -> np.ndarray:
        return np.array([lab.value for lab in self.labels])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(list(self.names) + list(META_COLUMNS))
            for i in range(len(self)):
                wr.writerow([repr(float(v)) for v in self.X[i]]
                            + [self.participants[i], self.labels[i].value, self.origins[i].value])

    @classmethod
    def read_csv(cls, path) -> "FeatureTable":
        path = Path(path)
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{path}: empty feature file") from None
            if tuple(header[-3:]) != META_COLUMNS:
                raise DataError(f"{path}: last columns must be {','.join(META_COLUMNS)}")
            names = tuple(header[:-3])
            X, labels, parts, origins = [], [], [], []
            for line, row in enumerate(reader, start=2):
                if len(row) != len(header):
                    raise DataError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}")
                try:
                    X.append([float(v) for v in row[:-3]])
                    labels.append(fine(row[-2]))
                    origins.append(Origin(row[-1]))
                except ValueError as exc:
                    raise DataError(f"{path}:{line}: {exc}") from None
                parts.append(row[-3])
        if not X:
            raise DataError(f"{path}: no rows")
        return cls(np.array(X), labels, parts, origins, names)


# ---------------------------------------------------------------------------
# Standardization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StandardizationStats:
    mean: np.ndarray
    std: np.ndarray
    n_rows: int

    def to_dict(self) -> dict:
        return {"mean": [float(v) for v in self.mean], "std": [float(v) for v in self.std],
                "n_rows": self.n_rows}

    @classmethod
    def from_dict(cls, d: dict) -> "StandardizationStats":
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["std"], dtype=float),
                   int(d["n_rows"]))


def fit_standardizer(matrix) -> StandardizationStats:
    """Column means and sample standard deviations (N - 1)."""
    X = np.asarray(matrix, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("cannot fit a standardizer on an empty matrix")
    mean = X.mean(axis=0)
    std = X.std(axis=0, ddof=1) if X.shape[0] > 1 else np.zeros(X.shape[1])
    std = np.where(np.ptp(X, axis=0) == 0, 0.0, std)
    return StandardizationStats(mean, std, X.shape[0])


def apply_standardizer(stats: StandardizationStats, matrix) -> np.ndarray:
    """Z-scores; columns with zero training deviation map to 0."""
    X = np.asarray(matrix, dtype=float)
    if X.shape[-1] != stats.mean.size:
        raise DataError(f"expected {stats.mean.size} columns, got {X.shape[-1]}")
    scale = np.where(stats.std > 0, stats.std, 1.0)
    return np.where(stats.std > 0, (X - stats.mean) / scale, 0.0)


__all__ = ["AXIS_STATS", "FEATURE_NAMES", "N_FEATURES", "FeatureTable", "StandardizationStats",
           "apply_standardizer", "extract", "extract_matrix", "feature_index", "fit_standardizer",
           "sensor_features"]
