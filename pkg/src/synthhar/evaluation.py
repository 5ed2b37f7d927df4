"""Leave-one-subject-out evaluation and model comparison statistics."""

from __future__ import annotations

import csv
import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import DataError, guard
from .features import FeatureTable
from .labels import COARSE_LABELS, to_coarse
from .model import predict_matrix, train
from .signal import Origin

N_CLASSES = len(COARSE_LABELS)
_CIDX = {c: i for i, c in enumerate(COARSE_LABELS)}


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def confusion_matrix(truth, predicted) -> np.ndarray:
    """5 x 5 counts indexed by (true, predicted) coarse class."""
    if len(truth) != len(predicted):
        raise DataError("truth and predictions differ in length")
    cm = np.zeros((N_CLASSES, N_CLASSES), dtype=int)
    for t, p in zip(truth, predicted):
        cm[_CIDX[to_coarse(t)], _CIDX[to_coarse(p)]] += 1
    return cm


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    undefined: bool = False

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1,
                "undefined": self.undefined}


def prf1(cm, cls) -> ClassMetrics:
    """Precision, recall and F1 of one class.

    A zero denominator yields 0 for that metric and sets ``undefined``.
    """
    cm = np.asarray(cm)
    i = _CIDX[to_coarse(cls)]
    tp = cm[i, i]
    fp = cm[:, i].sum() - tp
    fn = cm[i, :].sum() - tp
    undefined = False
    if tp + fp == 0:
        precision, undefined = 0.0, True
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall, undefined = 0.0, True
    else:
        recall = tp / (tp + fn)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return ClassMetrics(float(precision), float(recall), float(f1), undefined)


@dataclass
class FoldResult:
    participant_id: str
    confusion: np.ndarray
    metrics: dict  # CoarseLabel -> ClassMetrics
    train_participants: tuple = ()

    @classmethod
    def from_confusion(cls, pid, cm, train_participants=()) -> "FoldResult":
        cm = np.asarray(cm, dtype=int)
        return cls(pid, cm, {c: prf1(cm, c) for c in COARSE_LABELS}, tuple(train_participants))

    @property
    def n_windows(self) -> int:
        return int(self.confusion.sum())

    @property
    def overall_f1(self) -> float:
        """Macro F1 over the classes present in this participant's truth."""
        present = [c for c in COARSE_LABELS if self.confusion[_CIDX[c]].sum() > 0]
        if not present:
            return 0.0
        return float(np.mean([self.metrics[c].f1 for c in present]))

    def to_dict(self) -> dict:
        return {"participant": self.participant_id, "n_windows": self.n_windows,
                "overall_f1": self.overall_f1, "confusion": self.confusion.tolist(),
                "metrics": {c.value: m.to_dict() for c, m in self.metrics.items()}}


def _summary(values) -> dict:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return {"mean": 0.0, "sd": 0.0, "min": 0.0, "max": 0.0, "n": 0}
    sd = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return {"mean": float(v.mean()), "sd": sd, "min": float(v.min()), "max": float(v.max()),
            "n": int(v.size)}


@dataclass
class EvaluationReport:
    folds: list
    name: str = ""
    exclude_absent: bool = False
    notes: list = field(default_factory=list)

    @property
    def participants(self) -> list[str]:
        return [f.participant_id for f in self.folds]

    def fold(self, pid: str) -> FoldResult:
        for f in self.folds:
            if f.participant_id == pid:
                return f
        raise KeyError(pid)

    def per_class(self) -> dict:
        """Mean, SD, min and max of precision/recall/F1 across participants.

        Undefined (zero-denominator) values enter as 0. With
        ``exclude_absent`` a fold is skipped for a class it neither contains
        nor predicts.
        """
        out = {}
        for c in COARSE_LABELS:
            i = _CIDX[c]
            folds = self.folds
            if self.exclude_absent:
                folds = [f for f in folds if f.confusion[i].sum() + f.confusion[:, i].sum() > 0]
            out[c.value] = {m: _summary([getattr(f.metrics[c], m) for f in folds])
                            for m in ("precision", "recall", "f1")}
        return out

    def overall_f1(self) -> np.ndarray:
        return np.array([f.overall_f1 for f in self.folds])

    @property
    def macro_f1(self) -> float:
        """Mean over participants of the per-participant macro F1."""
        return float(self.overall_f1().mean()) if self.folds else 0.0

    def pooled_confusion(self) -> np.ndarray:
        return sum((f.confusion for f in self.folds), np.zeros((N_CLASSES, N_CLASSES), dtype=int))

    def to_dict(self) -> dict:
        return {"name": self.name, "n_folds": len(self.folds), "macro_f1": self.macro_f1,
                "overall_f1": _summary(self.overall_f1()), "per_class": self.per_class(),
                "folds": [f.to_dict() for f in self.folds], "classes": [c.value for c in COARSE_LABELS],
                "notes": list(self.notes)}

    @classmethod
    def from_dict(cls, d: dict) -> "EvaluationReport":
        folds = [FoldResult.from_confusion(f["participant"], f["confusion"]) for f in d["folds"]]
        return cls(folds, d.get("name", ""), notes=list(d.get("notes", [])))

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    @classmethod
    def read_json(cls, path) -> "EvaluationReport":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def write_confusion_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["participant", "true"] + [c.value for c in COARSE_LABELS])
            for f in self.folds:
                for c in COARSE_LABELS:
                    wr.writerow([f.participant_id, c.value] + f.confusion[_CIDX[c]].tolist())


# ---------------------------------------------------------------------------
# Leave-one-subject-out
# ---------------------------------------------------------------------------

def _fold(table: FeatureTable, pid: str, selected, k: int) -> FoldResult:
    parts = np.array(table.participants)
    test = np.flatnonzero(parts == pid)
    trn = np.flatnonzero(parts != pid)
    train_pids = set(parts[trn].tolist())
    guard(pid not in train_pids, f"held-out participant {pid} appears in its training rows")
    guard(not set(test.tolist()) & set(trn.tolist()), "held-out rows appear in training rows")
    model = train(table.X[trn], [table.labels[i] for i in trn], selected, k, table.names)
    guard(model.stats.n_rows == trn.size, "standardizer was not fitted on exactly the training rows")
    pred = predict_matrix(model, table.X[test], table.names)
    cm = confusion_matrix([table.labels[i] for i in test], pred)
    return FoldResult.from_confusion(pid, cm, sorted(train_pids))


def loso_cv(table: FeatureTable, selected_features: Sequence[str], k: int = 5,
            participants: Sequence[str] | None = None, threads: int = 1,
            name: str = "", require_real: bool = True) -> EvaluationReport:
    """One fold per participant; each fold trains on everyone else.

    The standardizer is refitted inside every fold on its training rows.
    Listed ``participants`` without windows are skipped with a warning.
    """
    if require_real and any(o is not Origin.REAL for o in table.origins):
        raise DataError("leave-one-subject-out evaluation expects real windows only")
    present = sorted(set(table.participants))
    wanted = list(participants) if participants is not None else present
    notes = []
    for pid in wanted:
        if pid not in present:
            msg = f"participant {pid} has no windows; fold skipped"
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
            notes.append(msg)
    folds_for = [p for p in wanted if p in present]
    if len(present) < 2:
        raise DataError("leave-one-subject-out needs at least two participants")
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            folds = list(pool.map(lambda p: _fold(table, p, selected_features, k), folds_for))
    else:
        folds = [_fold(table, p, selected_features, k) for p in folds_for]
    total = sum(f.n_windows for f in folds)
    expected = sum(1 for p in table.participants if p in set(folds_for))
    guard(total == expected, "every held-out window must be evaluated exactly once")
    return EvaluationReport(folds, name, notes=notes)


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------

def friedman_test(scores) -> tuple[float, float]:
    """Friedman chi-square over a participants x models matrix.

    Average ranks are used for ties with the usual tie correction. If every
    row is constant the statistic is 0 and p is 1.
    """
    S = np.asarray(scores, dtype=float)
    if S.ndim != 2 or S.shape[0] < 2 or S.shape[1] < 2:
        raise DataError("Friedman test needs at least 2 participants and 2 models")
    n, k = S.shape
    R = np.apply_along_axis(stats.rankdata, 1, S)
    Rj = R.sum(axis=0)
    ties = 0.0
    for row in S:
        _, t = np.unique(row, return_counts=True)
        ties += float(np.sum(t ** 3 - t))
    denom = 1.0 - ties / (n * k * (k * k - 1))
    if denom <= 0:
        return 0.0, 1.0
    q = (12.0 / (n * k * (k + 1)) * np.sum(Rj ** 2) - 3.0 * n * (k + 1)) / denom
    q = max(float(q), 0.0)
    return q, float(stats.chi2.sf(q, k - 1))


def _signed_rank_null(doubled: np.ndarray) -> np.ndarray:
    """Null distribution of the doubled positive-rank sum (counts)."""
    total = int(doubled.sum())
    dist = np.zeros(total + 1)
    dist[0] = 1.0
    for r in doubled:
        shifted = np.zeros_like(dist)
        shifted[r:] = dist[:total + 1 - r]
        dist = dist + shifted
    return dist


EXACT_MAX_N = 25


def wilcoxon_signed_rank(paired_a, paired_b, corrections: int = 1) -> float:
    """Two-sided Wilcoxon signed-rank p-value, Bonferroni-multiplied.

    Zero differences are dropped. Up to 25 remaining pairs the exact null
    distribution (with average ranks for ties) is used, beyond that a normal
    approximation with continuity and tie corrections.
    """
    a = np.asarray(paired_a, dtype=float)
    b = np.asarray(paired_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise DataError("paired samples must be one-dimensional and of equal length")
    if corrections < 1:
        raise DataError("corrections must be at least 1")
    d = a - b
    d = d[d != 0]
    n = d.size
    if n == 0:
        return 1.0
    ranks = stats.rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    if n <= EXACT_MAX_N:
        doubled = np.rint(2 * ranks).astype(int)
        dist = _signed_rank_null(doubled)
        dist /= dist.sum()
        w2 = int(round(2 * w_plus))
        lower = dist[:w2 + 1].sum()
        upper = dist[w2:].sum()
        p = min(1.0, 2.0 * min(lower, upper))
    else:
        mean = n * (n + 1) / 4.0
        _, t = np.unique(np.abs(d), return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(t ** 3 - t) / 48.0
        z = max(abs(w_plus - mean) - 0.5, 0.0) / np.sqrt(var)
        p = min(1.0, 2.0 * float(stats.norm.sf(z)))
    return float(min(1.0, p * corrections))


@dataclass
class ComparisonReport:
    models: list
    participants: list
    overall_f1: dict  # model -> list of per-participant overall F1
    friedman_statistic: float
    friedman_p: float
    pairwise: list  # [{"a", "b", "p_corrected", "mean_delta"}]
    class_deltas: dict  # class -> metric -> mean(b) - mean(a) for the first pair
    winner: str | None

    def to_dict(self) -> dict:
        return {"models": self.models, "participants": self.participants,
                "overall_f1": self.overall_f1, "friedman": {"statistic": self.friedman_statistic,
                                                           "p": self.friedman_p},
                "pairwise_wilcoxon": self.pairwise, "class_deltas": self.class_deltas,
                "winner": self.winner}

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)


def compare_models(*reports: EvaluationReport, names: Sequence[str] | None = None,
                   alpha: float = 0.05) -> ComparisonReport:
    """Friedman test, then Bonferroni-corrected pairwise Wilcoxon tests.

    Class deltas compare the second report with the first (``b - a``) on
    the per-class means.
    """
    if len(reports) < 2:
        raise DataError("need at least two reports to compare")
    names = list(names) if names is not None else [r.name or f"model_{i}" for i, r in enumerate(reports)]
    if len(set(names)) != len(names):
        names = [f"{n}_{i}" for i, n in enumerate(names)]
    pids = sorted(reports[0].participants)
    for r in reports[1:]:
        if sorted(r.participants) != pids:
            raise DataError("reports cover different participants")
    scores = np.array([[r.fold(p).overall_f1 for r in reports] for p in pids])
    stat, p = friedman_test(scores)
    pairs = list(combinations(range(len(reports)), 2))
    pairwise = []
    for i, j in pairs:
        pc = wilcoxon_signed_rank(scores[:, j], scores[:, i], corrections=len(pairs))
        pairwise.append({"a": names[i], "b": names[j], "p_corrected": pc,
                         "mean_delta": float(np.mean(scores[:, j] - scores[:, i]))})
    ca, cb = reports[0].per_class(), reports[1].per_class()
    deltas = {c: {m: cb[c][m]["mean"] - ca[c][m]["mean"] for m in ("precision", "recall", "f1")}
              for c in ca}
    winner = None
    means = scores.mean(axis=0)
    best = int(np.argmax(means))
    if p < alpha and all(pw["p_corrected"] < alpha for pw in pairwise
                         if names[best] in (pw["a"], pw["b"])):
        winner = names[best]
    return ComparisonReport(names, pids, {names[i]: scores[:, i].tolist() for i in range(len(names))},
                            stat, p, pairwise, deltas, winner)


__all__ = ["ClassMetrics", "ComparisonReport", "EvaluationReport", "FoldResult", "compare_models",
           "confusion_matrix", "friedman_test", "loso_cv", "prf1", "wilcoxon_signed_rank"]
